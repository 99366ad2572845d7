"""Command line interface.

Three subcommands: `run` integrates one scenario/scheme/mesh combination
and prints a run log, the errors against the scenario's reference, and
the solution snapshots; `table` runs a convergence study over a list of
meshes and prints the per-component L1 errors and orders; `list` shows
the scenario registry.  Options can also come from a config file of
"key = value" lines (see core.read_config_file); command line flags win
over file values.

All numbers are printed with 17 significant digits so runs can be
compared across machines at full double precision.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bench import (
    SCENARIOS,
    convergence_table,
    get_scenario,
    run_scenario,
    scheme_from_name,
)
from .core import apply_overrides, read_config_file
from .solver import write_snapshot

__all__ = ["main"]


def _g17(x) -> str:
    return format(float(x), ".17g")


def _parse_cells_list(text):
    try:
        cells = [int(part) for part in str(text).split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"bad cell list {text!r}; expected e.g. 100,200,400")
    if not cells:
        raise ValueError("empty cell list")
    return cells


def _add_common(sp):
    sp.add_argument("--scenario", help="scenario name (see `wbfv list`)")
    sp.add_argument("--scheme", choices=("sm", "wbm", "dwbm"),
                    help="standard, exact well-balanced or Newton well-balanced")
    sp.add_argument("--order", type=int, choices=(1, 2, 3),
                    help="spatial reconstruction order")
    sp.add_argument("--np", type=int, dest="n_p", metavar="K",
                    help="quadrature points per cell")
    sp.add_argument("--k-reuse", type=int, dest="k_reuse", metavar="K",
                    help="Newton steps between Jacobian refreshes")
    sp.add_argument("--tol", type=float, help="Newton tolerance")
    sp.add_argument("--t-end", type=float, dest="t_end", help="final time")
    sp.add_argument("--out", metavar="DIR", help="write output files here")
    sp.add_argument("--config", metavar="FILE", help="key = value config file")
    sp.add_argument("--reference-cells", type=int, dest="reference_cells",
                    metavar="N", help="override the fine reference mesh size")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="wbfv",
        description="High order well-balanced finite volume runs for 1D "
                    "balance laws.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and report errors")
    _add_common(p_run)
    p_run.add_argument("--cells", type=int, help="number of cells")
    p_run.add_argument("--skip-reference", action="store_true",
                       help="skip the reference solution and error report")
    p_run.set_defaults(func=_cmd_run)

    p_table = sub.add_parser("table", help="convergence study over meshes")
    _add_common(p_table)
    p_table.add_argument("--cells", help="comma separated list, e.g. 100,200,400")
    p_table.set_defaults(func=_cmd_table)

    p_list = sub.add_parser("list", help="list available scenarios")
    p_list.set_defaults(func=_cmd_list)
    return parser


def _merged_options(args):
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {
        "scenario": args.scenario,
        "scheme": args.scheme,
        "order": args.order,
        "cells": getattr(args, "cells", None),
        "np": args.n_p,
        "k_reuse": args.k_reuse,
        "newton_tol": args.tol,
        "t_end": args.t_end,
        "output_dir": args.out,
    }
    return apply_overrides(file_values, overrides)


def _require_scenario(opts):
    name = opts.get("scenario")
    if not name:
        raise ValueError("a scenario is required (--scenario or config file)")
    return get_scenario(name)


def _run_kwargs(opts):
    return dict(
        n_p=opts.get("np"),
        k_reuse=opts.get("k_reuse"),
        tol=opts.get("newton_tol"),
        t_end=opts.get("t_end"),
        cfl=opts.get("cfl"),
        newton_max_iter=opts.get("newton_max_iter"),
    )


_REFERENCE_TEXT = {
    "initial": "the initial stationary averages",
    "exact": "the unperturbed stationary averages",
    "steady-state": "the boundary-driven steady state",
    "fine": "a fine-mesh first-order well-balanced run",
}


def _print_run_log(rec):
    s = rec.scenario
    d = rec.result.diagnostics
    print(f"scenario {s.name}: {s.description}")
    print(f"model {rec.model.name}, domain [{_g17(s.a)}, {_g17(s.b)}], "
          f"{rec.grid.n_cells} cells, dx = {_g17(rec.grid.dx)}")
    print(f"scheme {rec.scheme.value}{rec.order}, n_p = {rec.config.n_p}, "
          f"cfl = {_g17(rec.config.cfl)}, t_end = {_g17(rec.config.t_end)}, "
          f"newton tol = {_g17(rec.config.newton_tol)}, "
          f"k_reuse = {rec.config.jacobian_reuse_k}")
    print(f"steps {d['steps']}, newton max iterations "
          f"{d['newton_max_iterations']}, fallback cells max "
          f"{d['fallback_cells_max']}, wall {_g17(d['wall_ms'])} ms")


def _print_errors(rec):
    if rec.errors is None:
        print("errors: skipped (no reference)")
        return
    what = _REFERENCE_TEXT[rec.scenario.reference.kind]
    print(f"L1 errors vs {what} at t = {_g17(rec.config.t_end)}:")
    for name, err in zip(rec.model.component_names, rec.errors):
        print(f"  {name}: {_g17(err)}")


def _snapshot_lines(rec, t):
    U = rec.result.at(t)
    x = rec.grid.centers
    H = np.asarray(rec.model.potential(x))
    header = ["x_center", *rec.model.component_names, "H"]
    yield " ".join(header)
    for i in range(rec.grid.n_cells):
        row = [x[i], *U[i], H[i]]
        yield " ".join(_g17(v) for v in row)


def _cmd_run(args):
    opts = _merged_options(args)
    scenario = _require_scenario(opts)
    scheme = scheme_from_name(opts.get("scheme", "dwbm"))
    order = int(opts.get("order", 3))
    cells = int(opts.get("cells", 100))
    rec = run_scenario(scenario, scheme, order, cells,
                       with_reference=not args.skip_reference,
                       fine_cells=args.reference_cells,
                       **_run_kwargs(opts))
    _print_run_log(rec)
    _print_errors(rec)
    out_dir = opts.get("output_dir")
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"{scenario.name}-{scheme.value}{order}-{cells}cells"
        for t in rec.result.times:
            path = out / f"{stem}-t{t:g}.txt"
            write_snapshot(path, rec.model, rec.grid, rec.result.at(t))
            print(f"wrote {path}")
    else:
        t = rec.result.times[-1]
        print(f"snapshot at t = {_g17(t)}:")
        for line in _snapshot_lines(rec, t):
            print(line)
    return 0


def _report_lines(report):
    yield (f"scenario {report.scenario}, scheme "
           f"{report.scheme.value}{report.order}")
    yield f"{'cells':>6}  {'component':<10}  {'l1_error':<25}  order"
    for row in report.rows:
        if row.failed is not None:
            yield f"{row.cells:>6}  run failed: {row.failed}"
            continue
        for c, name in enumerate(report.component_names):
            order = "-" if row.orders is None else _g17(row.orders[c])
            yield (f"{row.cells:>6}  {name:<10}  {_g17(row.l1[c]):<25}  "
                   f"{order}")


def _cmd_table(args):
    opts = _merged_options(args)
    scenario = _require_scenario(opts)
    scheme = scheme_from_name(opts.get("scheme", "dwbm"))
    order = int(opts.get("order", 3))
    cells = opts.get("cells")
    if cells is None:
        raise ValueError("a mesh list is required (--cells or config file)")
    meshes = [cells] if isinstance(cells, int) else _parse_cells_list(cells)
    report = convergence_table(scenario, scheme, order, meshes,
                               fine_cells=args.reference_cells,
                               **_run_kwargs(opts))
    lines = list(_report_lines(report))
    for line in lines:
        print(line)
    print("run log:")
    for row in report.rows:
        if row.failed is None:
            print(f"  {row.cells} cells: newton max {row.newton_max}, "
                  f"wall {_g17(row.wall_ms)} ms")
    out_dir = opts.get("output_dir")
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / (f"{report.scenario}-{report.scheme.value}"
                      f"{report.order}-errors.txt")
        path.write_text("\n".join(lines) + "\n")
        print(f"wrote {path}")
    return 0


def _cmd_list(args):
    width = max(len(name) for name in SCENARIOS)
    for name, s in SCENARIOS.items():
        model = s.make_model()
        print(f"{name:<{width}}  [{model.name}]  {s.description}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (KeyError, ValueError, RuntimeError, OSError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        print(f"wbfv: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
