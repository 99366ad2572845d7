"""Per-cell equilibrium control problem.

Given a cell [x_L, x_L + dx] and a target average W, find the initial
state U0 at the left edge such that the stationary solution U(x) launched
from U0 reproduces W under the cell quadrature rule:

    F_h(U0) = sum_l alpha_l U(x_l) = W.

The Jacobian of F_h is assembled from an adjoint march: for each
component j, lambda_j solves

    d(lambda_j)/dx = -e_j - grad_U G(U(x), x)^T lambda_j,  lambda_j(dx) = 0,

and DF_h = Lambda(0)^T / dx.  Newton starts from U0 = W, checks the
residual before the first update (so an exactly stationary average costs
zero iterations), and can hold the Jacobian fixed for k_reuse iterations.

Everything here is batched: one call solves the control problem for all
cells of a mesh at once.  Thin per-cell wrappers expose the same
machinery for a single cell.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import CellQuadratureLayout, Grid
from .integrate import adjoint_march, march_states, quad_average, reverse_march

__all__ = [
    "FailureReason",
    "EquilibriumSolution",
    "NoEquilibrium",
    "CellEquilibria",
    "solve_cells",
    "newton_solve",
    "functional_Fh",
    "jacobian_DFh",
    "sw_scalar_newton",
    "extend_averages",
    "extend_to_stencil",
    "RESONANCE_RTOL",
]

# Eigenvalues of Df closer to zero than this (relative to the wave speed
# scale) count as resonance and disqualify the cell from the WB path.
RESONANCE_RTOL = 1e-8

_DIVERGENCE_FACTOR = 10.0
_DIVERGENCE_STRIKES = 2


class FailureReason(enum.Enum):
    NEWTON_DIVERGED = "NewtonDiverged"
    SINGULAR_JACOBIAN = "SingularJacobian"
    RESONANCE = "Resonance"
    INTEGRATION_FAILURE = "IntegrationFailure"
    MAX_ITERATIONS = "MaxIterations"


@dataclass(frozen=True)
class EquilibriumSolution:
    """Converged control problem for one cell."""

    U0: np.ndarray              # (N,) state at the left edge
    averages: np.ndarray        # (N,) quadrature average (== W to tolerance)
    states_refined: np.ndarray  # (R, N) stationary states on the refined submesh
    iterations: int             # Newton updates applied
    residual: float             # final max-norm of F_h - W


@dataclass(frozen=True)
class NoEquilibrium:
    """Failed control problem; the cell falls back to the standard scheme."""

    reason: FailureReason
    iterations: int
    residual: float


class CellEquilibria:
    """Batched control-problem results for B cells."""

    def __init__(self, U0, averages, states_refined, iterations, residual, ok, reason):
        self.U0 = U0                          # (B, N)
        self.averages = averages              # (B, N)
        self.states_refined = states_refined  # (B, R, N)
        self.iterations = iterations          # (B,) int
        self.residual = residual              # (B,)
        self.ok = ok                          # (B,) bool
        self.reason = reason                  # (B,) object (FailureReason | None)

    def __len__(self):
        return len(self.U0)

    def cell(self, i):
        if self.ok[i]:
            return EquilibriumSolution(
                self.U0[i].copy(), self.averages[i].copy(),
                self.states_refined[i].copy(),
                int(self.iterations[i]), float(self.residual[i]))
        return NoEquilibrium(self.reason[i], int(self.iterations[i]),
                             float(self.residual[i]))


def _reduced_callbacks(model, reduced, W):
    """rhs/grad over the active components with the invariants frozen."""
    inv = list(reduced.invariant)
    W_inv = W[:, inv]

    def rhs(Ua, x):
        return reduced.rhs(Ua, W_inv, x)

    def grad(Ua, x):
        return reduced.rhs_grad(Ua, W_inv, x)

    return rhs, grad


def _state_checks(model, states, finite_ok):
    """Split failures into integration problems and resonance."""
    with np.errstate(all="ignore"):
        adm = model.admissible(states).all(axis=-1) & finite_ok
        margin = model.hyperbolicity_margin(states)
        speed = model.max_wave_speed(states)
        near = margin < RESONANCE_RTOL * np.maximum(1.0, speed)
        resonant = adm & np.where(np.isfinite(margin), near, False).any(axis=-1)
    return adm, resonant


def _hadamard_scale(DF):
    """Row-wise Hadamard bound on |det DF|, used to flag singular systems."""
    return np.prod(np.abs(DF).max(axis=-1), axis=-1)


def solve_cells(model, layout: CellQuadratureLayout, x_left, W,
                tol=1e-8, max_iter=20, k_reuse=1, reduced=False):
    """Solve the control problem on a batch of cells.

    x_left: (B,) left edge positions; W: (B, N) target averages.
    With reduced=True and a model that declares a reduced stationary form,
    Newton runs on the active components only and the invariant components
    are copied through untouched.
    """
    x_left = np.atleast_1d(np.asarray(x_left, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    B, N = W.shape
    dx = layout.dx

    use_reduced = reduced and model.reduced is not None
    if use_reduced:
        red = model.reduced
        act = list(red.active)
        rhs, grad = _reduced_callbacks(model, red, W)
        target = W[:, act]
    else:
        act = list(range(N))
        rhs, grad = model.stationary_rhs, model.stationary_rhs_grad
        target = W

    nodes = x_left[:, None] + layout.refined_offsets[None, :]

    def embed(states_a):
        if not use_reduced:
            return states_a
        full = np.empty(states_a.shape[:-1] + (N,))
        full[..., act] = states_a
        inv = list(red.invariant)
        shaped = W[:, inv].reshape((B,) + (1,) * (states_a.ndim - 2) + (len(inv),))
        full[..., inv] = shaped
        return full

    def march(U0a):
        vals, finite = march_states(rhs, nodes, U0a)
        full = embed(vals)
        adm, resonant = _state_checks(model, full, finite)
        return vals, full, adm, resonant

    iterations = np.zeros(B, dtype=int)
    reason = np.full(B, None, dtype=object)
    active = np.ones(B, dtype=bool)

    U0a = target.copy()
    vals, full, adm, resonant = march(U0a)
    reason[active & ~adm] = FailureReason.INTEGRATION_FAILURE
    reason[active & adm & resonant] = FailureReason.RESONANCE
    active &= adm & ~resonant

    avg = quad_average(layout, vals)
    resid = np.abs(avg - target).max(axis=-1)
    resid = np.where(np.isfinite(resid), resid, np.inf)
    converged = active & (resid <= tol)
    active &= ~converged

    strikes = np.zeros(B, dtype=int)
    DF = None
    for it in range(max_iter):
        if not active.any():
            break
        if DF is None or it % max(1, k_reuse) == 0:
            lam = adjoint_march(grad, x_left, layout, vals)
            DF = lam[:, 0].transpose(0, 2, 1) / dx
        scale = _hadamard_scale(DF)
        with np.errstate(all="ignore"):
            det = np.linalg.det(DF)
            singular = active & ~(np.abs(det) > 1e-14 * scale)
        reason[singular] = FailureReason.SINGULAR_JACOBIAN
        active &= ~singular
        if not active.any():
            break

        safe_DF = np.where(active[:, None, None], DF, np.eye(len(act)))
        with np.errstate(all="ignore"):
            V = np.linalg.solve(safe_DF, (avg - target)[..., None])[..., 0]
        bad = active & ~np.isfinite(V).all(axis=-1)
        reason[bad] = FailureReason.SINGULAR_JACOBIAN
        active &= ~bad

        U0a_new = np.where(active[:, None], U0a - V, U0a)
        vals_new, full_new, adm, resonant = march(U0a_new)
        reason[active & ~adm] = FailureReason.INTEGRATION_FAILURE
        reason[active & adm & resonant] = FailureReason.RESONANCE
        ok_step = adm & ~resonant

        avg_new = quad_average(layout, vals_new)
        resid_new = np.abs(avg_new - target).max(axis=-1)
        resid_new = np.where(np.isfinite(resid_new), resid_new, np.inf)

        upd = active & ok_step
        U0a = np.where(upd[:, None], U0a_new, U0a)
        take = upd[:, None, None]
        vals = np.where(take, vals_new, vals)
        full = np.where(take, full_new, full)
        avg = np.where(upd[:, None], avg_new, avg)
        iterations = iterations + upd

        grew = upd & (resid_new > _DIVERGENCE_FACTOR * resid)
        strikes = np.where(grew, strikes + 1, np.where(upd, 0, strikes))
        resid = np.where(upd, resid_new, resid)
        active &= ok_step

        diverged = active & (strikes >= _DIVERGENCE_STRIKES)
        reason[diverged] = FailureReason.NEWTON_DIVERGED
        active &= ~diverged

        done = active & (resid <= tol)
        converged |= done
        active &= ~done

    reason[active] = FailureReason.MAX_ITERATIONS

    ok = converged
    U0_full = embed(U0a)
    avg_full = W.copy() if use_reduced else avg
    if use_reduced:
        avg_full = np.array(W, copy=True)
        avg_full[:, act] = avg
    return CellEquilibria(U0_full, avg_full, full, iterations, resid, ok, reason)


# -- per-cell wrappers -------------------------------------------------------

def functional_Fh(model, layout: CellQuadratureLayout, x_left, U0):
    """Quadrature average of the stationary solution launched from U0.

    Returns (average, states_refined, ok).
    """
    U0 = np.asarray(U0, dtype=float)
    nodes = float(x_left) + layout.refined_offsets
    vals, finite = march_states(model.stationary_rhs, nodes[None, :], U0[None, :])
    avg = quad_average(layout, vals)
    return avg[0], vals[0], bool(finite[0])


def jacobian_DFh(model, layout: CellQuadratureLayout, x_left, states_refined):
    """Adjoint-based Jacobian of F_h at the marched states."""
    lam = adjoint_march(model.stationary_rhs_grad, np.atleast_1d(float(x_left)),
                        layout, np.asarray(states_refined)[None, ...])
    return lam[0, 0].T / layout.dx


def newton_solve(model, layout: CellQuadratureLayout, x_left, W,
                 tol=1e-8, max_iter=20, k_reuse=1, reduced=False):
    """Solve one cell; returns EquilibriumSolution or NoEquilibrium."""
    batch = solve_cells(model, layout, [float(x_left)], np.asarray(W, dtype=float)[None, :],
                        tol=tol, max_iter=max_iter, k_reuse=k_reuse, reduced=reduced)
    return batch.cell(0)


def sw_scalar_newton(model, layout: CellQuadratureLayout, x_left, W,
                     tol=1e-8, max_iter=20, k_reuse=1):
    """Shallow-water control problem through its scalar reduced form."""
    if model.reduced is None:
        raise ValueError("model has no reduced stationary form")
    return newton_solve(model, layout, x_left, W, tol=tol, max_iter=max_iter,
                        k_reuse=k_reuse, reduced=True)


# -- stencil extension -------------------------------------------------------

def extend_averages(model, layout: CellQuadratureLayout, edge_x, U_edge,
                    n_ext, direction):
    """Quadrature averages of the stationary extension over neighbor cells.

    Starting from the states U_edge (B, N) at edge positions edge_x (B,),
    march the stationary ODE across n_ext cells of width layout.dx to the
    right (direction=+1) or left (direction=-1).  Returns (avgs, ok) with
    avgs of shape (B, n_ext, N); avgs[:, e] is the average over the e-th
    cell away from the edge.
    """
    edge_x = np.atleast_1d(np.asarray(edge_x, dtype=float))
    U = np.atleast_2d(np.asarray(U_edge, dtype=float))
    B, N = U.shape
    avgs = np.empty((B, n_ext, N))
    ok = np.ones(B, dtype=bool)
    offs = layout.refined_offsets
    for e in range(n_ext):
        if direction > 0:
            nodes = edge_x[:, None] + e * layout.dx + offs[None, :]
            vals, finite = march_states(model.stationary_rhs, nodes, U)
            U = vals[:, -1]
        else:
            nodes = edge_x[:, None] - e * layout.dx - offs[None, :]
            vals, finite = reverse_march(model.stationary_rhs, nodes, U)
            U = vals[:, -1]
            vals = vals[:, ::-1]
        adm, resonant = _state_checks(model, vals, finite)
        ok &= adm & ~resonant
        avgs[:, e] = quad_average(layout, vals)
    return avgs, ok


def extend_to_stencil(model, layout: CellQuadratureLayout, grid: Grid, i,
                      solution: EquilibriumSolution, n_ext):
    """Stationary-extension averages for the stencil of cell i.

    Returns a dict mapping offset (-n_ext..-1, +1..+n_ext) to the average
    of the cell-i equilibrium continued into cell i+offset.
    """
    x_left = grid.left_edge(i)
    out = {}
    if n_ext <= 0:
        return out
    right, ok_r = extend_averages(model, layout, [x_left + layout.dx],
                                  solution.states_refined[-1][None, :], n_ext, +1)
    left, ok_l = extend_averages(model, layout, [x_left],
                                 solution.states_refined[0][None, :], n_ext, -1)
    if not (ok_r[0] and ok_l[0]):
        raise ValueError(f"stationary extension failed for cell {i}")
    for e in range(n_ext):
        out[e + 1] = right[0, e]
        out[-(e + 1)] = left[0, e]
    return out
