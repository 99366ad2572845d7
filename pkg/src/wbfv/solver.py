"""Semidiscrete finite-volume scheme and TVD Runge-Kutta time stepping.

The semidiscrete right-hand side combines a Rusanov numerical flux built
from the reconstructed interface traces with a quadrature source term.
Well-balanced cells subtract their own stationary trace inside the flux
bracket and their stationary source inside the quadrature, so a discrete
stationary solution yields a zero right-hand side up to solver tolerances:

    dU_i/dt = -(1/dx) (F_{i+1/2} - f(U*_{i+1/2}) - F_{i-1/2} + f(U*_{i-1/2}))
              + sum_l alpha_l (S(P_l) - S(U*_l)) H_x(x_l).

Fallback and standard-scheme cells carry U* = 0; the source formula then
degrades to the plain quadrature source (S(0) = 0 for every model here)
and the stationary flux terms are skipped.

Two ghost cells pad each end of the grid.  Dirichlet states fill the
ghosts with averages of the stationary solution through the prescribed
state, built with the same integrator and quadrature the reconstruction
uses.  Free boundaries extrapolate at the accuracy of the interior: the
standard scheme extends the outermost averages with a degree order-1
polynomial (a plain copy would cap outflow accuracy at first order),
while the well-balanced schemes continue the boundary cell's own
stationary solution outward (a copy would break the discrete
equilibrium at the outflow interface, which the interior machinery
preserves to machine precision).  Either extrapolation falls back to a
copy when it produces an inadmissible state.  Component Dirichlet data
copies the interior and overwrites the pinned entries.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import BoundarySpec, CellQuadratureLayout, Grid, Scheme, SimulationConfig
from .equilibrium import extend_averages, solve_cells
from .reconstruct import _cauchy_from_center, operator_for_order, wb_reconstruct_batch

__all__ = [
    "rusanov_flux",
    "GhostCells",
    "build_ghosts",
    "semidiscrete_rhs",
    "cfl_dt",
    "tvd_rk3_step",
    "RunResult",
    "run",
    "write_snapshot",
    "SNAPSHOT_COLUMNS",
]


def rusanov_flux(model, UL, UR):
    """Two-point flux 0.5 (f(UL) + f(UR)) - 0.5 s (UR - UL), s local."""
    UL = np.asarray(UL, dtype=float)
    UR = np.asarray(UR, dtype=float)
    s = np.maximum(model.max_wave_speed(UL), model.max_wave_speed(UR))
    return 0.5 * (model.flux(UL) + model.flux(UR)) - 0.5 * s[..., None] * (UR - UL)


# ---------------------------------------------------------------------------
# ghost cells


@dataclass
class GhostCells:
    """Ghost averages for both ends, ordered outward-in.

    left[k] / right[k] is the k-th ghost cell counted from the domain
    (k = 0 touches the boundary).  Rows that stay None are dynamic (they
    track the interior) and are filled on every padding call.
    """

    left: np.ndarray | None
    right: np.ndarray | None


def _stationary_ghosts(model, layout, edge_x, state, direction, scheme):
    """Averages of the stationary solution through (edge_x, state).

    direction -1 marches out of the domain to the left, +1 to the right.
    The closed-form equilibrium is used when the scheme works with exact
    equilibria and the model has one; otherwise the RK4 extension runs.
    """
    state = np.asarray(state, dtype=float)
    if scheme is Scheme.WBM:
        sampler = model.exact_equilibrium_through(edge_x, state)
        if sampler is not None:
            sign = 1.0 if direction > 0 else -1.0
            out = np.empty((2, len(state)))
            for k in range(2):
                nodes = edge_x + sign * (k * layout.dx + layout.node_offsets)
                out[k] = np.einsum("l,lc->c", layout.weights, sampler(nodes))
            return out
    avgs, ok = extend_averages(model, layout, edge_x, state, 2, direction)
    if not ok.all():
        side = "left" if direction < 0 else "right"
        raise RuntimeError(
            f"stationary extension for the {side} boundary state {state} failed")
    return avgs[0]


def build_ghosts(model, layout: CellQuadratureLayout, grid: Grid,
                 cfg: SimulationConfig) -> GhostCells:
    """Precompute the time-independent ghost averages (Dirichlet states)."""
    left = right = None
    if cfg.left_bc.kind == "dirichlet_state":
        left = _stationary_ghosts(model, layout, grid.a, cfg.left_bc.state,
                                  -1, cfg.scheme)
    if cfg.right_bc.kind == "dirichlet_state":
        right = _stationary_ghosts(model, layout, grid.b, cfg.right_bc.state,
                                   +1, cfg.scheme)
    return GhostCells(left=left, right=right)


def _continuation_ghosts(model, layout: CellQuadratureLayout, grid: Grid,
                         cfg: SimulationConfig, U, side):
    """Ghost averages continuing the boundary cell's stationary solution.

    Uses the same per-cell equilibrium solve the reconstruction performs
    on that cell (closed form for WBM, Newton for third order, the
    midpoint Cauchy shortcut below), so at a discrete equilibrium the
    ghost averages coincide bitwise with the cell's own extension and the
    boundary interface stays fluctuation-free.  Returns None when the
    solve fails; the caller falls back to plain copies.
    """
    direction = -1 if side == "left" else +1
    i = 0 if side == "left" else grid.n_cells - 1
    x_left = grid.left_edge(i)
    edge_x = grid.a if side == "left" else grid.b
    W = U[i][None, :]
    with np.errstate(all="ignore"):
        if cfg.scheme is Scheme.WBM:
            nodes = x_left + layout.node_offsets[None, :]
            made = model.exact_equilibrium(nodes, layout.weights, W)
            if made is None:
                return None
            sampler, ok = made
            if not ok.all():
                return None
            out = np.empty((2, U.shape[1]))
            for k in range(1, 3):
                vals = sampler(nodes + direction * k * layout.dx)
                if not (np.isfinite(vals).all() and model.admissible(vals).all()):
                    return None
                out[k - 1] = np.einsum("l,blc->c", layout.weights, vals)
            return out
        if cfg.order >= 3:
            res = solve_cells(model, layout, np.array([x_left]), W,
                              tol=cfg.newton_tol, max_iter=cfg.newton_max_iter,
                              k_reuse=cfg.jacobian_reuse_k)
            if not res.ok[0]:
                return None
            states = res.states_refined
        else:
            states, ok = _cauchy_from_center(model, layout, np.array([x_left]), W)
            if not ok[0]:
                return None
        edge_state = states[:, -1] if direction > 0 else states[:, 0]
        avgs, ok = extend_averages(model, layout, edge_x, edge_state, 2, direction)
        if not ok[0]:
            return None
        return avgs[0]


def _extrapolated_ghosts(model, padded, side, order, n_cells):
    """Ghost averages extrapolating the interior at the scheme's order.

    Degree order-1 polynomial extension of the outermost cell averages
    (in cell index, which is exact for cell averages of polynomials).
    Returns None, meaning "copy instead", when the scheme is first order,
    the grid is too short, or the extrapolated states are inadmissible.
    """
    if order < 2 or n_cells < order:
        return None
    if side == "left":
        a, b, c = padded[2], padded[3], padded[min(4, n_cells + 1)]
    else:
        a, b, c = padded[-3], padded[-4], padded[max(-5, -n_cells - 2)]
    if order == 2:
        rows = np.stack([2.0 * a - b, 3.0 * a - 2.0 * b])
    else:
        rows = np.stack([3.0 * a - 3.0 * b + c, 6.0 * a - 8.0 * b + 3.0 * c])
    if np.isfinite(rows).all() and model.admissible(rows).all():
        return rows
    return None


def _apply_bc(model, layout, grid, cfg, padded, bc: BoundarySpec, fixed, side):
    """Fill two ghost rows of the padded array for one side."""
    if side == "left":
        ghosts, interior = (slice(1, None, -1), 2)
    else:
        ghosts, interior = (slice(-2, None), -3)
    if bc.kind == "free":
        if cfg.scheme is Scheme.SM:
            rows = _extrapolated_ghosts(model, padded, side, cfg.order,
                                        grid.n_cells)
        else:
            rows = _continuation_ghosts(model, layout, grid, cfg,
                                        padded[2:-2], side)
        padded[ghosts] = padded[interior] if rows is None else rows
    elif bc.kind == "dirichlet_state":
        padded[ghosts] = fixed
    else:  # dirichlet_components
        row = padded[interior].copy()
        for idx, val in bc.components:
            row[idx] = val
        padded[ghosts] = row


def pad_with_ghosts(model, layout: CellQuadratureLayout, grid: Grid,
                    cfg: SimulationConfig, U, ghosts: GhostCells):
    """Return the (n + 4, N) array of averages including two ghosts per side."""
    U = np.asarray(U, dtype=float)
    n, N = U.shape
    padded = np.empty((n + 4, N))
    padded[2:-2] = U
    _apply_bc(model, layout, grid, cfg, padded, cfg.left_bc, ghosts.left, "left")
    _apply_bc(model, layout, grid, cfg, padded, cfg.right_bc, ghosts.right, "right")
    return padded


# ---------------------------------------------------------------------------
# semidiscrete right-hand side


def semidiscrete_rhs(model, layout: CellQuadratureLayout, grid: Grid,
                     cfg: SimulationConfig, padded):
    """Right-hand side dU_i/dt for the interior cells.

    padded: (n + 4, N) averages with ghosts.  Returns (rhs, info) where
    info carries the per-call Newton and fallback diagnostics.
    """
    n = grid.n_cells
    dx = grid.dx
    r = operator_for_order(cfg.order).radius
    width = 2 * r + 1

    # reconstruct cells -1 .. n (the interior plus one ghost on each side,
    # so every interface sees traces from both sides)
    windows = np.lib.stride_tricks.sliding_window_view(padded, width, axis=0)
    stencil = windows.transpose(0, 2, 1)[1 - r : n + 3 - r]
    cells = np.arange(-1, n + 1)
    rec = wb_reconstruct_batch(model, layout, grid.left_edge(cells), stencil, cfg)

    flux_interfaces = rusanov_flux(model, rec.u_minus_right[:-1],
                                   rec.u_plus_left[1:])          # (n+1, N)
    own = slice(1, n + 1)
    rhs = -(flux_interfaces[1:] - flux_interfaces[:-1]) / dx

    wb = rec.wb_active[own]
    if wb.any():
        # stationary flux terms, evaluated only where U* is a real state
        safe_l = np.where(wb[:, None], rec.ustar_left[own], 1.0)
        safe_r = np.where(wb[:, None], rec.ustar_right[own], 1.0)
        f_l = np.where(wb[:, None], model.flux(safe_l), 0.0)
        f_r = np.where(wb[:, None], model.flux(safe_r), 0.0)
        rhs += (f_r - f_l) / dx

    nodes = grid.left_edges[:, None] + layout.node_offsets[None, :]
    hx = model.potential_x(nodes)                                 # (n, M)
    src = model.source(rec.p_at_nodes[own]) - model.source(rec.ustar_at_nodes[own])
    rhs += np.einsum("l,ilc,il->ic", layout.weights, src, hx)

    info = {
        "newton_max": int(rec.newton_iterations.max(initial=0)),
        "newton_iterations": rec.newton_iterations[own],
        "fallback_cells": int((~rec.wb_active[own]).sum()) if cfg.scheme is not Scheme.SM else 0,
    }
    return rhs, info


# ---------------------------------------------------------------------------
# time stepping


def cfl_dt(model, grid: Grid, cfg: SimulationConfig, U, t, t_next):
    """CFL time step, capped so the step lands exactly on t_next."""
    remaining = t_next - t
    speed = float(np.max(model.max_wave_speed(np.asarray(U, dtype=float))))
    if not np.isfinite(speed):
        raise RuntimeError(f"wave speed lost finiteness at t = {t}")
    if speed <= 0.0:
        return remaining
    return min(cfg.cfl * grid.dx / speed, remaining)


def tvd_rk3_step(model, layout, grid, cfg, U, dt, ghosts, stats=None):
    """One Shu-Osher three-stage step; ghosts refresh before every stage."""

    def L(V):
        padded = pad_with_ghosts(model, layout, grid, cfg, V, ghosts)
        rhs, info = semidiscrete_rhs(model, layout, grid, cfg, padded)
        if stats is not None:
            stats.absorb(info)
        return rhs

    U1 = U + dt * L(U)
    U2 = 0.75 * U + 0.25 * (U1 + dt * L(U1))
    return (U + 2.0 * (U2 + dt * L(U2))) / 3.0


class _RunStats:
    def __init__(self):
        self.newton_max = 0
        self.fallback_max = 0

    def absorb(self, info):
        self.newton_max = max(self.newton_max, info["newton_max"])
        self.fallback_max = max(self.fallback_max, info["fallback_cells"])


@dataclass
class RunResult:
    """Averages at the requested output times plus run diagnostics."""

    times: np.ndarray            # (T,)
    snapshots: np.ndarray        # (T, n_cells, N)
    diagnostics: dict = field(default_factory=dict)

    def at(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t = {t}")
        return self.snapshots[k]

    @property
    def final(self):
        return self.snapshots[-1]


def run(model, grid: Grid, layout: CellQuadratureLayout,
        cfg: SimulationConfig, W0) -> RunResult:
    """Advance the averages W0 to cfg.t_end, snapshotting on the way.

    Output times are cfg.output_times plus t_end (and t = 0); the CFL
    step is shortened to land on each of them exactly.
    """
    U = np.array(W0, dtype=float)
    if U.ndim != 2 or U.shape[0] != grid.n_cells:
        raise ValueError("W0 must have shape (n_cells, N)")

    stops = sorted({float(s) for s in cfg.output_times
                    if 0.0 < s <= cfg.t_end} | ({cfg.t_end} if cfg.t_end > 0 else set()))
    times = [0.0]
    snaps = [U.copy()]
    ghosts = build_ghosts(model, layout, grid, cfg)
    stats = _RunStats()
    steps = 0
    t = 0.0
    started = time.perf_counter()

    for stop in stops:
        while t < stop:
            dt = cfl_dt(model, grid, cfg, U, t, stop)
            U = tvd_rk3_step(model, layout, grid, cfg, U, dt, ghosts, stats)
            if not np.isfinite(U).all():
                raise RuntimeError(
                    f"averages lost finiteness at t = {t + dt} (step {steps + 1})")
            t += dt
            steps += 1
        t = stop
        times.append(t)
        snaps.append(U.copy())

    return RunResult(
        times=np.array(times),
        snapshots=np.array(snaps),
        diagnostics={
            "steps": steps,
            "newton_max_iterations": stats.newton_max,
            "fallback_cells_max": stats.fallback_max,
            "wall_ms": 1e3 * (time.perf_counter() - started),
        },
    )


# ---------------------------------------------------------------------------
# snapshot files

SNAPSHOT_COLUMNS = "x_center, one column per state component, H(x_center)"


def write_snapshot(path, model, grid: Grid, U):
    """Write one output table: x_center, the N components, then H(x_center)."""
    U = np.asarray(U, dtype=float)
    x = grid.centers
    table = np.column_stack([x, U, np.asarray(model.potential(x), dtype=float)])
    header = " ".join(["x_center", *model.component_names, "H"])
    np.savetxt(path, table, fmt="%.17g", header=header)
    return path
