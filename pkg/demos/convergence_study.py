"""Measure convergence orders of the standard schemes on a steady profile.

The standard (non well-balanced) schemes approximate the exponential
equilibrium of the first Burgers model with their usual truncation error,
so refining the mesh shows the design orders 1, 2 and 3. The well-balanced
scheme is exact on this problem at every resolution, which is the whole
point: its error row is flat at roundoff and has no measurable order.
"""

import numpy as np

from wbfv import convergence_table, run_scenario

MESHES = (25, 50, 100, 200)


def main():
    print("standard schemes on burgers1-steady, L1 error at t = 5")
    print(f"{'cells':>6}", end="")
    for order in (1, 2, 3):
        print(f" {'sm' + str(order):>12} {'order':>7}", end="")
    print()

    reports = [convergence_table("burgers1-steady", "sm", order, MESHES)
               for order in (1, 2, 3)]
    for i, cells in enumerate(MESHES):
        print(f"{cells:>6}", end="")
        for rep in reports:
            row = rep.rows[i]
            order = "-" if row.orders is None else f"{row.orders[0]:.3f}"
            print(f" {row.l1[0]:>12.4e} {order:>7}", end="")
        print()

    rec = run_scenario("burgers1-steady", "dwbm", 3, 100)
    print()
    print(f"dwbm3 at 100 cells for comparison: {np.abs(rec.errors).max():.3e}")
    print("(flat at roundoff on every mesh, so no order is measurable)")


if __name__ == "__main__":
    main()
