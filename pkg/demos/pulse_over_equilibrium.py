"""Send a Gaussian pulse across a steady state and watch it leave cleanly.

The burgers1-pulse scenario adds a small Gaussian bump to the exponential
equilibrium of the first Burgers model. The bump is advected to the right,
steepens, and exits through the free boundary; by t = 10 the exact solution
is the plain equilibrium again.

The script runs the third-order standard and well-balanced schemes on 100
cells and prints the L1 distance to the unperturbed equilibrium while the
pulse travels. Both schemes transport the pulse, but only the well-balanced
scheme returns to the equilibrium at roundoff once it has left; the
standard scheme keeps its stationary truncation error forever.
"""

from wbfv import l1_error, run_scenario


def main():
    records = {scheme: run_scenario("burgers1-pulse", scheme, 3, 100)
               for scheme in ("sm", "dwbm")}
    times = records["sm"].result.times
    print(f"{'t':>6} {'sm3 vs steady':>15} {'dwbm3 vs steady':>17}")
    for t in times:
        row = []
        for scheme in ("sm", "dwbm"):
            rec = records[scheme]
            err = l1_error(rec.result.at(t), rec.reference, rec.grid.dx)
            row.append(err[0])
        print(f"{t:>6g} {row[0]:>15.3e} {row[1]:>17.3e}")
    print()
    print("At t = 0 both columns show the bump itself. Once the pulse has")
    print("left the domain (t = 10), dwbm3 is back on the equilibrium to")
    print("machine precision; sm3 is left with its own discretization error.")


if __name__ == "__main__":
    main()
