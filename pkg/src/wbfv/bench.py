"""Benchmark scenarios: registry, initial conditions, errors and tables.

A Scenario bundles everything a reproducible run needs: the model with its
potential, the domain and final time, boundary conditions, how the initial
averages are built, and what the numerical solution is compared against.
Initial conditions come in three kinds:

  - "stationary": march the stationary ODE from a prescribed left state
    across the whole domain (one RK4 chain over the concatenated per-cell
    submeshes) and average each cell with the run's quadrature rule;
  - "analytic": average a closed-form state profile with the quadrature;
  - "implicit": shallow water only, solve the per-node cubic of the
    Bernoulli relations and average.

Any of them can carry a Gaussian bump added to selected components, again
averaged with the same quadrature.  References for error tables are the
scenario's own stationary averages (steady tests), the closed-form profile
(models with known stationary families), a separately anchored stationary
chain (relaxation toward a steady state driven by the boundaries), or a
fine-mesh first-order well-balanced run restricted to the coarse grid and
cached on disk.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .core import (
    BoundarySpec,
    CellQuadratureLayout,
    Grid,
    Scheme,
    SimulationConfig,
    build_layout,
    dirichlet_components,
    dirichlet_state,
    free_bc,
)
from .integrate import march_states, quad_average, reverse_march
from .models import (
    BalanceLawModel,
    burgers1_model,
    burgers2_model,
    coupled_burgers_model,
    euler_gravity_model,
    shallow_water_model,
)
from .solver import RunResult, run

__all__ = [
    "GaussianBump",
    "ICSpec",
    "ReferenceSpec",
    "Scenario",
    "SCENARIOS",
    "get_scenario",
    "scheme_from_name",
    "ensure_scheme_available",
    "stationary_ic",
    "quadrature_averages",
    "perturbed_ic",
    "sw_implicit_ic",
    "l1_error",
    "restrict_averages",
    "reference_solution",
    "ScenarioRun",
    "run_scenario",
    "MeshRow",
    "ErrorReport",
    "convergence_table",
]


# ---------------------------------------------------------------------------
# scenario definitions


@dataclass(frozen=True)
class GaussianBump:
    """Perturbation amplitude * exp(-decay (x - center)^2) on some components."""

    amplitude: float
    decay: float
    center: float
    components: tuple


@dataclass(frozen=True)
class ICSpec:
    """How the initial cell averages are built (bit-exact, no hidden state)."""

    kind: str                         # "stationary" | "analytic" | "implicit"
    left_state: tuple | None = None   # state at x = a (stationary / implicit)
    profile: Callable | None = None   # x -> (..., N) states (analytic)
    bump: GaussianBump | None = None

    def __post_init__(self):
        if self.kind not in ("stationary", "analytic", "implicit"):
            raise ValueError(f"unknown IC kind {self.kind!r}")


@dataclass(frozen=True)
class ReferenceSpec:
    """What errors are measured against.

    kind:
      - "initial": the run's own initial averages (steady scenarios);
      - "exact": the unperturbed closed-form profile, averaged;
      - "steady-state": a stationary chain anchored at `anchor_state` on the
        `anchor` side of the domain (the state the boundaries drive toward);
      - "fine": first-order well-balanced run on `fine_cells`, restricted.
    """

    kind: str
    fine_cells: int = 0
    anchor: str = "left"
    anchor_state: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("initial", "exact", "steady-state", "fine"):
            raise ValueError(f"unknown reference kind {self.kind!r}")
        if self.kind == "fine" and self.fine_cells < 1:
            raise ValueError("fine reference needs fine_cells")


@dataclass(frozen=True)
class Scenario:
    """A named, fully reproducible benchmark problem."""

    name: str
    description: str
    model_factory: Callable[[], BalanceLawModel]
    a: float
    b: float
    t_end: float
    cfl: float
    left_bc: BoundarySpec
    right_bc: BoundarySpec
    ic: ICSpec
    reference: ReferenceSpec
    n_p: int = 1
    k_reuse: int = 1
    output_times: tuple = ()

    def make_model(self) -> BalanceLawModel:
        return self.model_factory()

    def grid(self, cells: int) -> Grid:
        return Grid(self.a, self.b, cells)

    def config(self, scheme: Scheme, order: int, *, n_p=None, k_reuse=None,
               tol=None, t_end=None, cfl=None, newton_max_iter=None,
               output_times=None) -> SimulationConfig:
        t_end = float(self.t_end if t_end is None else t_end)
        if output_times is None:
            output_times = tuple(t for t in self.output_times if t < t_end)
        kw = {}
        if tol is not None:
            kw["newton_tol"] = float(tol)
        if newton_max_iter is not None:
            kw["newton_max_iter"] = int(newton_max_iter)
        return SimulationConfig(
            order=order,
            scheme=scheme,
            cfl=float(self.cfl if cfl is None else cfl),
            t_end=t_end,
            n_p=int(self.n_p if n_p is None else n_p),
            jacobian_reuse_k=int(self.k_reuse if k_reuse is None else k_reuse),
            left_bc=self.left_bc,
            right_bc=self.right_bc,
            output_times=output_times,
            **kw,
        )


# potentials used by the registry (models default to H(x) = x)


def _cosine_hump_depth(x):
    x = np.asarray(x, dtype=float)
    inside = (x >= 1.3) & (x <= 1.7)
    return np.where(inside, -0.25 * (1.0 + np.cos(5.0 * np.pi * (x + 0.5))), 0.0)


def _cosine_hump_depth_x(x):
    x = np.asarray(x, dtype=float)
    inside = (x >= 1.3) & (x <= 1.7)
    return np.where(inside, 1.25 * np.pi * np.sin(5.0 * np.pi * (x + 0.5)), 0.0)


def _basin_depth(x):
    x = np.asarray(x, dtype=float)
    return 1.0 - 0.5 * np.exp(-x * x)


def _basin_depth_x(x):
    x = np.asarray(x, dtype=float)
    return x * np.exp(-x * x)


# closed-form stationary profiles used as analytic ICs / references


def _exp_profile(x):
    x = np.asarray(x, dtype=float)
    return np.exp(x)[..., None]


_COS_AMP = math.sqrt(3.0) / 3.0
_OMEGA = math.sqrt(3.0) / 2.0


def _coupled_profile(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(2.5 * x)
    c = np.cos(_OMEGA * x)
    s = np.sin(_OMEGA * x)
    return np.stack([e * (c + _COS_AMP * s), e * (c - _COS_AMP * s)], axis=-1)


def _lake_profile(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (2,))
    out[..., 0] = _basin_depth(x)
    return out


_COUPLED_LEFT = tuple(float(v) for v in _coupled_profile(np.float64(-1.0)))


def _sw_hump_model():
    return shallow_water_model(potential=_cosine_hump_depth,
                               potential_x=_cosine_hump_depth_x)


def _sw_basin_model():
    return shallow_water_model(potential=_basin_depth, potential_x=_basin_depth_x)


_PULSE = dict(amplitude=0.3, decay=200.0, center=-0.5)

SCENARIOS: dict[str, Scenario] = {}


def _register(s: Scenario):
    SCENARIOS[s.name] = s
    return s


_register(Scenario(
    name="burgers1-steady",
    description="Burgers flux with quadratic source, exponential steady state",
    model_factory=burgers1_model,
    a=-1.0, b=1.0, t_end=5.0, cfl=0.9,
    left_bc=dirichlet_state([math.exp(-1.0)]), right_bc=free_bc(),
    ic=ICSpec(kind="analytic", left_state=(math.exp(-1.0),), profile=_exp_profile),
    reference=ReferenceSpec(kind="initial"),
    n_p=3,
))

_register(Scenario(
    name="burgers1-pulse",
    description="Gaussian pulse riding the exponential steady state",
    model_factory=burgers1_model,
    a=-1.0, b=1.0, t_end=10.0, cfl=0.9,
    left_bc=dirichlet_state([math.exp(-1.0)]), right_bc=free_bc(),
    ic=ICSpec(kind="analytic", left_state=(math.exp(-1.0),), profile=_exp_profile,
              bump=GaussianBump(components=(0,), **_PULSE)),
    reference=ReferenceSpec(kind="exact"),
    output_times=(0.5, 1.0),
))

_register(Scenario(
    name="burgers2-steady",
    description="Burgers flux with sine source, steady state marched from u(a) = 2",
    model_factory=burgers2_model,
    a=-1.0, b=1.0, t_end=5.0, cfl=0.9,
    left_bc=dirichlet_state([2.0]), right_bc=free_bc(),
    ic=ICSpec(kind="stationary", left_state=(2.0,)),
    reference=ReferenceSpec(kind="initial"),
))

_register(Scenario(
    name="burgers2-pulse",
    description="Gaussian pulse riding the sine-source steady state",
    model_factory=burgers2_model,
    a=-1.0, b=1.0, t_end=5.0, cfl=0.9,
    left_bc=dirichlet_state([2.0]), right_bc=free_bc(),
    ic=ICSpec(kind="stationary", left_state=(2.0,),
              bump=GaussianBump(components=(0,), **_PULSE)),
    reference=ReferenceSpec(kind="fine", fine_cells=12800),
    output_times=(0.3,),
))

_register(Scenario(
    name="coupled-steady",
    description="Coupled Burgers system, oscillatory exponential steady state",
    model_factory=coupled_burgers_model,
    a=-1.0, b=1.0, t_end=5.0, cfl=0.9,
    left_bc=dirichlet_state(_COUPLED_LEFT), right_bc=free_bc(),
    ic=ICSpec(kind="analytic", left_state=_COUPLED_LEFT, profile=_coupled_profile),
    reference=ReferenceSpec(kind="initial"),
    n_p=3,
))

_register(Scenario(
    name="sw-subcritical",
    description="Subcritical shallow-water flow over a cosine hump",
    model_factory=_sw_hump_model,
    a=0.0, b=3.0, t_end=5.0, cfl=0.9,
    left_bc=dirichlet_state([2.0, 3.5]), right_bc=free_bc(),
    ic=ICSpec(kind="stationary", left_state=(2.0, 3.5)),
    reference=ReferenceSpec(kind="initial"),
))

_register(Scenario(
    name="sw-subcritical-implicit",
    description="Same hump flow, initial depths from the cubic Bernoulli solve",
    model_factory=_sw_hump_model,
    a=0.0, b=3.0, t_end=5.0, cfl=0.9,
    left_bc=dirichlet_state([2.0, 3.5]), right_bc=free_bc(),
    ic=ICSpec(kind="implicit", left_state=(2.0, 3.5)),
    reference=ReferenceSpec(kind="initial"),
))

_register(Scenario(
    name="sw-relaxation",
    description="Lake at rest over a basin relaxing to the inflow-driven steady state",
    model_factory=_sw_basin_model,
    a=-5.0, b=5.0, t_end=5000.0, cfl=0.5,
    left_bc=dirichlet_components({1: 0.1}),
    right_bc=dirichlet_components({0: 1.0}),
    ic=ICSpec(kind="analytic", profile=_lake_profile),
    reference=ReferenceSpec(kind="steady-state", anchor="right",
                            anchor_state=(1.0, 0.1)),
    output_times=(100.0, 1000.0),
))

_register(Scenario(
    name="euler-supersonic",
    description="Supersonic gas column in a uniform gravitational field",
    model_factory=euler_gravity_model,
    a=-1.0, b=1.0, t_end=5.0, cfl=0.9,
    left_bc=dirichlet_state([1.0, 10.0, 52.0]), right_bc=free_bc(),
    ic=ICSpec(kind="stationary", left_state=(1.0, 10.0, 52.0)),
    reference=ReferenceSpec(kind="initial"),
    k_reuse=20,
))

_register(Scenario(
    name="euler-pulse",
    description="Density pulse riding the supersonic gravitational steady state",
    model_factory=euler_gravity_model,
    a=-1.0, b=1.0, t_end=5.0, cfl=0.9,
    left_bc=dirichlet_state([1.0, 10.0, 52.0]), right_bc=free_bc(),
    ic=ICSpec(kind="stationary", left_state=(1.0, 10.0, 52.0),
              bump=GaussianBump(components=(0,), **_PULSE)),
    reference=ReferenceSpec(kind="fine", fine_cells=6400),
    output_times=(0.05,),
    k_reuse=20,
))


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        known = ", ".join(sorted(SCENARIOS))
        raise KeyError(f"unknown scenario {name!r}; known: {known}") from None


def scheme_from_name(name) -> Scheme:
    if isinstance(name, Scheme):
        return name
    try:
        return Scheme(str(name).lower())
    except ValueError:
        raise ValueError(f"unknown scheme {name!r}; use sm, wbm or dwbm") from None


def ensure_scheme_available(model: BalanceLawModel, scheme: Scheme):
    """The exact-equilibria scheme needs a model with a closed-form family."""
    has_exact = type(model).exact_equilibrium is not BalanceLawModel.exact_equilibrium
    if scheme is Scheme.WBM and not has_exact:
        raise ValueError(
            f"scheme wbm needs a closed-form stationary family, which model "
            f"{model.name!r} does not provide; use dwbm instead")


# ---------------------------------------------------------------------------
# initial conditions


def stationary_ic(model, grid: Grid, layout: CellQuadratureLayout, left_state,
                  anchor: str = "left"):
    """Cell averages of the stationary solution through a boundary state.

    One RK4 chain runs across the whole domain on the concatenated per-cell
    refined submeshes; each cell is then averaged with the layout's
    quadrature.  With anchor="right" the chain is anchored at x = b instead
    and marched leftward (each leg shooting-corrected so forward marches
    retrace it).
    """
    state = np.asarray(left_state, dtype=float)
    n = grid.n_cells
    W = np.empty((n, state.size))
    U = state[None, :]
    if anchor == "left":
        for i in range(n):
            nodes = (grid.left_edge(i) + layout.refined_offsets)[None, :]
            vals, ok = march_states(model.stationary_rhs, nodes, U)
            if not ok.all():
                raise RuntimeError(f"stationary march lost finiteness in cell {i}")
            W[i] = quad_average(layout, vals)[0]
            U = vals[:, -1]
    elif anchor == "right":
        for i in range(n - 1, -1, -1):
            nodes = (grid.left_edge(i) + layout.refined_offsets[::-1])[None, :]
            vals, ok = reverse_march(model.stationary_rhs, nodes, U)
            if not ok.all():
                raise RuntimeError(f"stationary march lost finiteness in cell {i}")
            W[i] = quad_average(layout, vals[:, ::-1])[0]
            U = vals[:, -1]
    else:
        raise ValueError(f"anchor must be 'left' or 'right', got {anchor!r}")
    return W


def quadrature_averages(profile, grid: Grid, layout: CellQuadratureLayout):
    """Cell averages of an analytic state profile under the layout's rule."""
    nodes = layout.cell_nodes(grid.left_edges)          # (n, L)
    states = np.asarray(profile(nodes), dtype=float)    # (n, L, N)
    return np.einsum("l,ilc->ic", layout.weights, states)


def perturbed_ic(base, grid: Grid, layout: CellQuadratureLayout,
                 bump: GaussianBump):
    """Base averages plus the quadrature average of a Gaussian bump."""
    W = np.array(base, dtype=float)
    nodes = layout.cell_nodes(grid.left_edges)
    values = bump.amplitude * np.exp(-bump.decay * (nodes - bump.center) ** 2)
    cell_avg = np.einsum("l,il->i", layout.weights, values)
    for c in bump.components:
        W[:, c] += cell_avg
    return W


def sw_implicit_ic(model, grid: Grid, layout: CellQuadratureLayout,
                   c1, c2, branch: str):
    """Shallow-water averages from the implicit stationary relations.

    The depth at every quadrature node solves the cubic
    q^2/(2 h^2) + g (h - H(x)) = c2 with q = c1 on the requested branch;
    averages use the layout's quadrature.  Raises if any node has no
    admissible root.
    """
    nodes = layout.cell_nodes(grid.left_edges)
    h, ok = model.implicit_sample(nodes, float(c1), float(c2), branch)
    if not ok.all():
        bad = int(np.argwhere(~ok)[0][0])
        raise RuntimeError(
            f"no {branch} depth at a quadrature node of cell {bad}; "
            f"the implicit stationary state does not exist there")
    W = np.empty((grid.n_cells, 2))
    W[:, 0] = np.einsum("l,il->i", layout.weights, h)
    W[:, 1] = float(c1)
    return W


def _base_averages(scenario: Scenario, model, grid: Grid,
                   layout: CellQuadratureLayout):
    ic = scenario.ic
    if ic.kind == "stationary":
        return stationary_ic(model, grid, layout, ic.left_state)
    if ic.kind == "analytic":
        return quadrature_averages(ic.profile, grid, layout)
    # implicit: constants from the anchor state at x = a
    h0, q0 = ic.left_state
    c2 = (q0 * q0 / (2.0 * h0 * h0) + model.g * h0
          - model.g * float(model.potential(scenario.a)))
    branch = ("subcritical" if h0 > model.critical_depth(q0)
              else "supercritical")
    return sw_implicit_ic(model, grid, layout, q0, c2, branch)


def initial_averages(scenario: Scenario, model, grid: Grid,
                     layout: CellQuadratureLayout):
    """The scenario's initial cell averages (bump included if it has one)."""
    W = _base_averages(scenario, model, grid, layout)
    if scenario.ic.bump is not None:
        W = perturbed_ic(W, grid, layout, scenario.ic.bump)
    return W


# ---------------------------------------------------------------------------
# errors and references


def l1_error(U, ref, dx):
    """Per-component L1 distance: sum_i |U_i - ref_i| dx."""
    U = np.asarray(U, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if U.shape != ref.shape:
        raise ValueError(f"grid mismatch: {U.shape} vs {ref.shape}")
    return np.abs(U - ref).sum(axis=0) * float(dx)


def restrict_averages(fine, coarse_cells: int):
    """Exact average of fine cells onto a coarser grid (counts must divide)."""
    fine = np.asarray(fine, dtype=float)
    n_fine = fine.shape[0]
    if n_fine % coarse_cells:
        raise ValueError(f"{n_fine} fine cells do not restrict to {coarse_cells}")
    factor = n_fine // coarse_cells
    return fine.reshape(coarse_cells, factor, -1).mean(axis=1)


def _cache_dir(explicit=None) -> Path:
    if explicit is not None:
        return Path(explicit)
    env = os.environ.get("WBFV_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "wbfv"


def _fine_reference(scenario: Scenario, fine_cells: int, t_end: float,
                    cache_dir=None):
    """Averages of the fine well-balanced run at t_end, cached on disk."""
    model = scenario.make_model()
    scheme = Scheme.WBM if type(model).exact_equilibrium is not \
        BalanceLawModel.exact_equilibrium else Scheme.DWBM
    key = f"{scenario.name}-{scheme.value}1-{fine_cells}cells-t{t_end:.17g}"
    path = _cache_dir(cache_dir) / f"{key}.npz"
    if path.exists():
        try:
            with np.load(path) as data:
                W = data["averages"]
                if W.shape == (fine_cells, model.n_comp) and np.isfinite(W).all():
                    return W
        except Exception:
            pass  # unreadable or stale cache: recompute below
    grid = scenario.grid(fine_cells)
    cfg = scenario.config(scheme, 1, t_end=t_end, output_times=())
    layout = build_layout(grid, cfg.rule, cfg.n_p)
    W0 = initial_averages(scenario, model, grid, layout)
    W = run(model, grid, layout, cfg, W0).final
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, averages=W)
    return W


def reference_solution(scenario: Scenario, grid: Grid,
                       layout: CellQuadratureLayout, *, t_end=None,
                       fine_cells=None, cache_dir=None):
    """Averages the scenario's runs are measured against, on the given grid."""
    ref = scenario.reference
    model = scenario.make_model()
    if ref.kind == "initial":
        return initial_averages(scenario, model, grid, layout)
    if ref.kind == "exact":
        return _base_averages(scenario, model, grid, layout)
    if ref.kind == "steady-state":
        return stationary_ic(model, grid, layout, ref.anchor_state,
                             anchor=ref.anchor)
    fine = int(ref.fine_cells if fine_cells is None else fine_cells)
    t = float(scenario.t_end if t_end is None else t_end)
    W_fine = _fine_reference(scenario, fine, t, cache_dir)
    return restrict_averages(W_fine, grid.n_cells)


# ---------------------------------------------------------------------------
# runs and tables


@dataclass
class ScenarioRun:
    """One scenario/scheme/order/mesh run with its reference and errors."""

    scenario: Scenario
    scheme: Scheme
    order: int
    model: BalanceLawModel
    grid: Grid
    layout: CellQuadratureLayout
    config: SimulationConfig
    initial: np.ndarray
    result: RunResult
    reference: np.ndarray | None
    errors: np.ndarray | None


def run_scenario(scenario, scheme, order: int, cells: int, *, n_p=None,
                 k_reuse=None, tol=None, t_end=None, cfl=None,
                 newton_max_iter=None, output_times=None,
                 with_reference=True, fine_cells=None,
                 cache_dir=None) -> ScenarioRun:
    """Run one scenario and, when asked, measure it against its reference."""
    if isinstance(scenario, str):
        scenario = get_scenario(scenario)
    scheme = scheme_from_name(scheme)
    model = scenario.make_model()
    ensure_scheme_available(model, scheme)
    grid = scenario.grid(cells)
    cfg = scenario.config(scheme, order, n_p=n_p, k_reuse=k_reuse, tol=tol,
                          t_end=t_end, cfl=cfl, newton_max_iter=newton_max_iter,
                          output_times=output_times)
    layout = build_layout(grid, cfg.rule, cfg.n_p)
    W0 = initial_averages(scenario, model, grid, layout)
    result = run(model, grid, layout, cfg, W0)
    reference = errors = None
    if with_reference:
        reference = reference_solution(scenario, grid, layout, t_end=cfg.t_end,
                                       fine_cells=fine_cells,
                                       cache_dir=cache_dir)
        errors = l1_error(result.final, reference, grid.dx)
    return ScenarioRun(scenario=scenario, scheme=scheme, order=order,
                       model=model, grid=grid, layout=layout, config=cfg,
                       initial=W0, result=result, reference=reference,
                       errors=errors)


@dataclass
class MeshRow:
    """One mesh of a convergence study."""

    cells: int
    l1: np.ndarray | None           # (N,) per component
    orders: np.ndarray | None       # (N,) vs the previous mesh, None on first
    wall_ms: float = 0.0
    newton_max: int = 0
    failed: str | None = None


@dataclass
class ErrorReport:
    """Per-mesh L1 errors and orders for one scenario/scheme/order."""

    scenario: str
    scheme: Scheme
    order: int
    component_names: tuple
    rows: list = field(default_factory=list)


def convergence_table(scenario, scheme, order: int, meshes, **run_kw) -> ErrorReport:
    """Run every mesh and collect errors plus log2(e_2h / e_h) orders.

    Meshes must grow by factors of 2 (orders are only defined between
    consecutive mesh pairs of ratio 2).  A failed run marks its row and the
    study continues.
    """
    if isinstance(scenario, str):
        scenario = get_scenario(scenario)
    scheme = scheme_from_name(scheme)
    meshes = [int(m) for m in meshes]
    for prev, cur in zip(meshes, meshes[1:]):
        if cur != 2 * prev:
            raise ValueError(f"meshes must double: {prev} -> {cur}")
    ensure_scheme_available(scenario.make_model(), scheme)
    report = ErrorReport(scenario=scenario.name, scheme=scheme, order=order,
                         component_names=scenario.make_model().component_names)
    prev_l1 = None
    for cells in meshes:
        try:
            rec = run_scenario(scenario, scheme, order, cells, **run_kw)
        except RuntimeError as exc:
            report.rows.append(MeshRow(cells=cells, l1=None, orders=None,
                                       failed=str(exc)))
            prev_l1 = None
            continue
        l1 = rec.errors
        orders = None
        if prev_l1 is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                orders = np.log2(prev_l1 / l1)
        report.rows.append(MeshRow(
            cells=cells, l1=l1, orders=orders,
            wall_ms=rec.result.diagnostics.get("wall_ms", 0.0),
            newton_max=rec.result.diagnostics.get("newton_max_iterations", 0)))
        prev_l1 = l1
    return report
