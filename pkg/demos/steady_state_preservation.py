"""Hold a stationary solution on a coarse mesh: standard vs well-balanced.

Every model in the registry has a scenario whose initial condition is a
discrete stationary solution. A perfect scheme leaves those cell averages
untouched. This script integrates each one to t = 1 on 50 cells with the
third-order standard scheme (sm3) and the Newton well-balanced scheme
(dwbm3) and prints the L1 drift from the initial averages.

Expected picture: the standard scheme drifts at the level of its own
truncation error (1e-4 to 1e-8 depending on the model), while the
well-balanced scheme stays within a few ulps of the exact equilibrium.
"""

import numpy as np

from wbfv import run_scenario

STEADY = [
    "burgers1-steady",
    "burgers2-steady",
    "coupled-steady",
    "sw-subcritical",
    "euler-supersonic",
]


def main():
    print(f"{'scenario':<18} {'sm3 drift':>12} {'dwbm3 drift':>12}")
    for name in STEADY:
        drifts = {}
        for scheme in ("sm", "dwbm"):
            rec = run_scenario(name, scheme, 3, 50, t_end=1.0)
            drifts[scheme] = np.abs(rec.errors).max()
        print(f"{name:<18} {drifts['sm']:>12.3e} {drifts['dwbm']:>12.3e}")
    print()
    print("The well-balanced columns sit at roundoff; the standard scheme")
    print("re-discretizes the equilibrium every step and pays truncation.")


if __name__ == "__main__":
    main()
