"""RK4 marches for stationary state and adjoint problems.

Everything here is batched: a "batch" is a set of cells handled at once,
states have shape (B, N) and trajectories (B, K, N).  The classical RK4
scheme is used throughout with the step sizes given by consecutive node
positions; no adaptive stepping.

The state is always marched on the 2x-refined submesh.  The adjoint then
marches on the plain submesh and every one of its RK4 stage points (step
endpoints and midpoints) coincides with a stored state node, so no state
interpolation is ever needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Trajectory", "rk4_march", "march_states", "reverse_march",
           "adjoint_march", "quad_average"]


@dataclass
class Trajectory:
    """States stored at ordered node positions (single batch entry)."""

    nodes: np.ndarray   # (K,)
    values: np.ndarray  # (K, N)
    direction: int      # +1 marched left-to-right, -1 right-to-left

    @property
    def start(self) -> np.ndarray:
        return self.values[0] if self.direction > 0 else self.values[-1]

    @property
    def end(self) -> np.ndarray:
        return self.values[-1] if self.direction > 0 else self.values[0]


def march_states(rhs, x_nodes, u_start, check: bool = True):
    """March du/dx = rhs(u, x) through x_nodes with classical RK4.

    Parameters
    ----------
    rhs : callable(u, x) -> array
        Vectorized right-hand side; u has shape (B, N), x shape (B,).
    x_nodes : array, shape (K,) or (B, K)
        Node positions per batch entry, visited in order (ascending for a
        forward march, descending for a backward one).
    u_start : array, shape (B, N)
        State at x_nodes[..., 0].
    check : bool
        When true, cells whose trajectory contains a non-finite value are
        reported in the returned mask.

    Returns
    -------
    values : array, shape (B, K, N)
    ok : array of bool, shape (B,)
    """
    u = np.atleast_2d(np.asarray(u_start, dtype=float))
    B, N = u.shape
    x = np.asarray(x_nodes, dtype=float)
    if x.ndim == 1:
        x = np.broadcast_to(x, (B, x.shape[0]))
    K = x.shape[1]
    out = np.empty((B, K, N))
    out[:, 0] = u
    with np.errstate(all="ignore"):
        for k in range(K - 1):
            x0 = x[:, k]
            h = (x[:, k + 1] - x0)[:, None]
            xm = x0 + 0.5 * h[:, 0]
            k1 = rhs(u, x0)
            k2 = rhs(u + 0.5 * h * k1, xm)
            k3 = rhs(u + 0.5 * h * k2, xm)
            k4 = rhs(u + h * k3, x[:, k + 1])
            u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            out[:, k + 1] = u
    if check:
        ok = np.isfinite(out).all(axis=(1, 2))
    else:
        ok = np.ones(B, dtype=bool)
    return out, ok


def reverse_march(rhs, x_nodes, u_anchor, check: bool = True, sweeps: int = 2):
    """March through x_nodes so that the forward march retraces the leg.

    A plain RK4 march through descending nodes does not invert a forward
    march over the same nodes exactly; the roundtrip leaves the method's
    reversal defect, O(step^5) per interval.  That defect is invisible in
    most uses but dominates equilibrium-preservation errors, because every
    state a reconstruction produces is compared against averages built by
    forward marches.  Here the backward march only seeds a guess for the
    state at the far node; fixed-point sweeps then correct that guess until
    the forward march from it reproduces ``u_anchor`` at the anchor node.
    The propagator across the leg is an O(span) perturbation of the
    identity, so each sweep shrinks the mismatch by that factor.  The
    returned trajectory is the final forward march reversed into the
    requested (descending) node order, with the anchor node pinned to
    ``u_anchor`` exactly; rows whose correction goes non-finite keep the
    plain backward march.

    Same signature and return convention as march_states: ``u_anchor`` is
    the state at x_nodes[..., 0], values come back at every node in the
    order given.
    """
    vals, ok = march_states(rhs, x_nodes, u_anchor, check)
    anchor = np.atleast_2d(np.asarray(u_anchor, dtype=float))
    x = np.asarray(x_nodes, dtype=float)
    if x.ndim == 1:
        x = np.broadcast_to(x, (anchor.shape[0], x.shape[0]))
    forward = x[:, ::-1]
    far = vals[:, -1]
    with np.errstate(all="ignore"):
        for _ in range(sweeps):
            traj, fine = march_states(rhs, forward, far)
            corrected = far - (traj[:, -1] - anchor)
            fine &= np.isfinite(corrected).all(axis=-1)
            far = np.where(fine[:, None], corrected, far)
        traj, fine = march_states(rhs, forward, far)
    vals = np.where(fine[:, None, None], traj[:, ::-1], vals)
    vals[:, 0] = anchor
    if check:
        ok = np.isfinite(vals).all(axis=(1, 2))
    return vals, ok


def rk4_march(rhs, submesh, u_start, direction: int = 1) -> Trajectory:
    """Single-trajectory RK4 march over the given submesh nodes.

    ``submesh`` is ascending; with direction=-1 the march starts from the
    last node and values are still returned in ascending node order.  A
    non-finite value at any stage aborts with ValueError naming the node.
    """
    nodes = np.asarray(submesh, dtype=float)
    path = nodes if direction > 0 else nodes[::-1]
    values, ok = march_states(lambda u, x: np.atleast_2d(rhs(u[0], x[0])),
                              path, np.atleast_2d(u_start))
    vals = values[0]
    if not ok[0]:
        bad = np.where(~np.isfinite(vals).all(axis=1))[0][0]
        raise ValueError(f"non-finite state while marching at x = {path[bad]}")
    if direction < 0:
        vals = vals[::-1]
    return Trajectory(nodes=nodes, values=vals, direction=1 if direction > 0 else -1)


def adjoint_march(grad_rhs, x_left, layout, state_refined, terminal=None):
    """Solve the adjoint problem of the cell-average functional backwards.

    For each unit direction e_j the adjoint solves

        dlam_j/dx = -e_j - grad_rhs(U(x), x)^T lam_j,   lam_j(dx) = 0,

    marching right-to-left on the cell submesh; the required states at step
    endpoints and midpoints are read from ``state_refined`` (the trajectory
    stored on the 2x-refined submesh, ascending order).  All N columns are
    marched together as a matrix Lambda with dLambda/dx = -I - gradG^T Lambda.

    Parameters
    ----------
    grad_rhs : callable(u, x) -> (B, N, N)
    x_left : (B,) cell left edges
    layout : CellQuadratureLayout
    state_refined : (B, 2K-1, N) stored states
    terminal : optional (B, N, N) value of Lambda at the right edge

    Returns
    -------
    lam : (B, K, N, N) adjoint matrices at the submesh nodes, ascending.
        lam[b, k, m, j] is component m of lambda_j at node k.
    """
    xl = np.atleast_1d(np.asarray(x_left, dtype=float))
    B = xl.shape[0]
    N = state_refined.shape[-1]
    sub = layout.submesh_offsets
    K = len(sub)
    eye = np.eye(N)
    lam = np.zeros((B, K, N, N))
    L = np.zeros((B, N, N)) if terminal is None else np.array(terminal, dtype=float)
    lam[:, K - 1] = L

    def f(Lm, u, x):
        return -eye - np.swapaxes(grad_rhs(u, x), -1, -2) @ Lm

    with np.errstate(all="ignore"):
        for k in range(K - 1, 0, -1):
            h = (sub[k - 1] - sub[k])  # negative
            x1 = xl + sub[k]
            xm = xl + sub[k] + 0.5 * h
            x0 = xl + sub[k - 1]
            u1 = state_refined[:, 2 * k]
            um = state_refined[:, 2 * k - 1]
            u0 = state_refined[:, 2 * k - 2]
            k1 = f(L, u1, x1)
            k2 = f(L + 0.5 * h * k1, um, xm)
            k3 = f(L + 0.5 * h * k2, um, xm)
            k4 = f(L + h * k3, u0, x0)
            L = L + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            lam[:, k - 1] = L
    return lam


def quad_average(layout, values_refined):
    """Quadrature average of states stored on the refined submesh.

    values_refined: (B, 2K-1, N) -> (B, N)
    """
    vals = values_refined[:, layout.quad_index_refined, :]
    return np.einsum("l,bln->bn", layout.weights, vals)
