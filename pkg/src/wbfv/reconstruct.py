"""Reconstruction operators and their well-balanced wrapper.

The standard operators (piecewise constant, MUSCL with minmod slopes,
third-order central WENO) map a stencil of cell values to a polynomial
per cell.  The well-balanced wrapper decomposes the solution in each cell
as P_i = U*_i + Q_i: U*_i is the local stationary solution whose cell
average matches U_i (solved by Newton, by the midpoint-anchored Cauchy
problem for orders 1-2, or by a closed-form equilibrium when the model
has one), and Q_i is the standard reconstruction applied to the
fluctuations V_j = U_j - (average of U*_i extended over cell j).

All reconstruction state is expressed in offsets from the cell center:
Q(xi) = c0 + c1*xi + c2*xi^2.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import CellQuadratureLayout, Scheme, SimulationConfig
from .equilibrium import extend_averages, solve_cells
from .integrate import march_states, quad_average, reverse_march

__all__ = [
    "ReconKind",
    "StandardOperator",
    "operator_for_order",
    "standard_coeffs",
    "standard_reconstruct",
    "Poly",
    "WBReconstruction",
    "MeshReconstruction",
    "wb_reconstruct_batch",
    "wb_reconstruct",
]


class ReconKind(enum.Enum):
    PIECEWISE_CONSTANT = "pc"
    MUSCL = "muscl"
    CWENO3 = "cweno3"


@dataclass(frozen=True)
class StandardOperator:
    kind: ReconKind

    @property
    def radius(self):
        return 0 if self.kind is ReconKind.PIECEWISE_CONSTANT else 1


_ORDER_KIND = {
    1: ReconKind.PIECEWISE_CONSTANT,
    2: ReconKind.MUSCL,
    3: ReconKind.CWENO3,
}


def operator_for_order(order) -> StandardOperator:
    return StandardOperator(_ORDER_KIND[int(order)])


def _minmod(a, b):
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def standard_coeffs(op: StandardOperator, stencil, dx,
                    eps=1e-6, exponent=2):
    """Polynomial coefficients (about cell centers) for a batch of cells.

    stencil: (B, 2r+1, N) cell values, own cell in the middle column.
    Returns coeffs (B, 3, N) for Q(xi) = c0 + c1 xi + c2 xi^2.
    """
    stencil = np.asarray(stencil, dtype=float)
    B, width, N = stencil.shape
    coeffs = np.zeros((B, 3, N))
    if op.kind is ReconKind.PIECEWISE_CONSTANT:
        coeffs[:, 0] = stencil[:, 0] if width == 1 else stencil[:, width // 2]
        return coeffs

    Vm, V0, Vp = stencil[:, 0], stencil[:, 1], stencil[:, 2]
    if op.kind is ReconKind.MUSCL:
        coeffs[:, 0] = V0
        coeffs[:, 1] = _minmod((V0 - Vm) / dx, (Vp - V0) / dx)
        return coeffs

    # CWENO3: candidates are the two one-sided linear polynomials and the
    # reserve parabola P0 = 2 P_opt - (P_L + P_R)/2, where P_opt matches
    # the three cell averages.  All candidates have cell average V0.
    d_left, d_center, d_right = 0.25, 0.5, 0.25
    sl = (V0 - Vm) / dx
    sr = (Vp - V0) / dx
    b_opt = (Vp - Vm) / (2.0 * dx)
    c_opt = (Vp - 2.0 * V0 + Vm) / (2.0 * dx * dx)
    a0 = V0 - c_opt * dx * dx / 6.0
    is_l = (V0 - Vm) ** 2
    is_r = (Vp - V0) ** 2
    dd = Vp - 2.0 * V0 + Vm
    is_c = (13.0 / 3.0) * dd * dd + 0.25 * (Vp - Vm) ** 2
    al = d_left / (eps + is_l) ** exponent
    ac = d_center / (eps + is_c) ** exponent
    ar = d_right / (eps + is_r) ** exponent
    s = al + ac + ar
    wl, wc, wr = al / s, ac / s, ar / s
    coeffs[:, 0] = (wl + wr) * V0 + wc * a0
    coeffs[:, 1] = wl * sl + wc * b_opt + wr * sr
    coeffs[:, 2] = wc * 2.0 * c_opt
    return coeffs


def eval_coeffs(coeffs, xi):
    """Evaluate batched polynomials at center offsets xi (scalar or (L,))."""
    xi = np.asarray(xi, dtype=float)
    c0, c1, c2 = coeffs[:, 0], coeffs[:, 1], coeffs[:, 2]
    if xi.ndim == 0:
        return c0 + xi * c1 + xi * xi * c2
    return (c0[:, None, :] + xi[None, :, None] * c1[:, None, :]
            + (xi * xi)[None, :, None] * c2[:, None, :])


class Poly:
    """Single-cell reconstruction polynomial, evaluable at absolute x."""

    def __init__(self, coeffs, x_center):
        self.coeffs = np.asarray(coeffs, dtype=float)  # (3, N)
        self.x_center = float(x_center)

    def __call__(self, x):
        xi = np.asarray(x, dtype=float) - self.x_center
        c0, c1, c2 = self.coeffs
        return c0 + xi[..., None] * c1 + (xi * xi)[..., None] * c2


def standard_reconstruct(op: StandardOperator, stencil_values, dx,
                         x_center=0.0, eps=1e-6, exponent=2) -> Poly:
    """Per-cell standard reconstruction from 2r+1 stencil values."""
    stencil = np.atleast_2d(np.asarray(stencil_values, dtype=float))
    if stencil.ndim == 2:
        stencil = stencil[None, ...]
    coeffs = standard_coeffs(op, stencil, dx, eps=eps, exponent=exponent)
    return Poly(coeffs[0], x_center)


@dataclass(frozen=True)
class WBReconstruction:
    """Per-cell well-balanced reconstruction output."""

    u_minus_right: np.ndarray   # P_i at the right interface
    u_plus_left: np.ndarray     # P_i at the left interface
    p_at_nodes: np.ndarray      # (M, N) P_i at quadrature nodes
    ustar_at_nodes: np.ndarray  # (M, N) stationary part at quadrature nodes
    ustar_left: np.ndarray
    ustar_right: np.ndarray
    wb_active: bool


class MeshReconstruction:
    """Batched reconstruction for all cells handed to the solver."""

    def __init__(self, B, M, N):
        self.u_minus_right = np.empty((B, N))
        self.u_plus_left = np.empty((B, N))
        self.p_at_nodes = np.empty((B, M, N))
        self.ustar_at_nodes = np.zeros((B, M, N))
        self.ustar_left = np.zeros((B, N))
        self.ustar_right = np.zeros((B, N))
        self.wb_active = np.zeros(B, dtype=bool)
        self.newton_iterations = np.zeros(B, dtype=int)
        self.newton_residual = np.zeros(B)

    def cell(self, i) -> WBReconstruction:
        return WBReconstruction(
            self.u_minus_right[i].copy(), self.u_plus_left[i].copy(),
            self.p_at_nodes[i].copy(), self.ustar_at_nodes[i].copy(),
            self.ustar_left[i].copy(), self.ustar_right[i].copy(),
            bool(self.wb_active[i]))


def _cauchy_from_center(model, layout: CellQuadratureLayout, x_left, W):
    """Stationary states through (x_center, W), marched to both edges.

    Returns (states_refined, ok): the order 1-2 shortcut in which the cell
    average under the midpoint rule is W by construction.
    """
    offs = layout.refined_offsets
    c = (len(offs) - 1) // 2
    fwd_nodes = x_left[:, None] + offs[None, c:]
    bwd_nodes = x_left[:, None] + offs[None, c::-1]
    fwd, ok_f = march_states(model.stationary_rhs, fwd_nodes, W)
    bwd, ok_b = reverse_march(model.stationary_rhs, bwd_nodes, W)
    states = np.concatenate([bwd[:, ::-1], fwd[:, 1:]], axis=1)
    with np.errstate(all="ignore"):
        adm = model.admissible(states).all(axis=-1) & ok_f & ok_b
        margin = model.hyperbolicity_margin(states)
        speed = model.max_wave_speed(states)
        near = margin < 1e-8 * np.maximum(1.0, speed)
        resonant = np.where(np.isfinite(margin), near, False).any(axis=-1)
    return states, adm & ~resonant


def _exact_states(model, layout: CellQuadratureLayout, x_left, W, radius):
    """Closed-form equilibrium states and neighbor averages (WBM path)."""
    nodes = x_left[:, None] + layout.node_offsets[None, :]
    sampler, ok = model.exact_equilibrium(nodes, layout.weights, W)
    edges = np.stack([x_left, x_left + layout.dx], axis=-1)
    ustar_nodes = sampler(nodes)
    ustar_edges = sampler(edges)
    ext = []
    for off in range(-radius, radius + 1):
        if off == 0:
            continue
        nb_nodes = nodes + off * layout.dx
        ext.append(np.einsum("l,blc->bc", layout.weights, sampler(nb_nodes)))
    with np.errstate(all="ignore"):
        allst = np.concatenate([ustar_nodes, ustar_edges], axis=1)
        ok = ok & model.admissible(allst).all(axis=-1) & np.isfinite(allst).all(axis=(-2, -1))
    return ustar_nodes, ustar_edges, ext, ok


def wb_reconstruct_batch(model, layout: CellQuadratureLayout, x_left, stencil,
                         cfg: SimulationConfig) -> MeshReconstruction:
    """Reconstruct a batch of cells.

    x_left: (B,) left-edge positions; stencil: (B, 2r+1, N) cell averages
    with the own average in the middle column.  cfg.scheme selects the
    standard path (SM), the closed-form equilibrium path (WBM) or the
    Newton path (DWBM).
    """
    x_left = np.asarray(x_left, dtype=float)
    stencil = np.asarray(stencil, dtype=float)
    op = operator_for_order(cfg.order)
    r = op.radius
    B, width, N = stencil.shape
    W = stencil[:, width // 2]
    dx = layout.dx
    M = layout.n_nodes
    out = MeshReconstruction(B, M, N)
    node_xi = layout.node_offsets - 0.5 * dx
    edge_xi = 0.5 * dx

    wb = np.zeros(B, dtype=bool)
    ustar_nodes = np.zeros((B, M, N))
    ustar_l = np.zeros((B, N))
    ustar_r = np.zeros((B, N))
    V = stencil.copy()

    if cfg.scheme is not Scheme.SM:
        if cfg.scheme is Scheme.WBM:
            if model.exact_equilibrium(x_left[:1, None] + layout.node_offsets[None, :],
                                       layout.weights, W[:1]) is None:
                raise ValueError(
                    f"scheme WBM needs a closed-form equilibrium; model "
                    f"{model.name!r} does not provide one")
            u_nodes, u_edges, ext, wb = _exact_states(model, layout, x_left, W, r)
            ustar_nodes = np.where(wb[:, None, None], u_nodes, 0.0)
            ustar_l = np.where(wb[:, None], u_edges[:, 0], 0.0)
            ustar_r = np.where(wb[:, None], u_edges[:, 1], 0.0)
            own_avg = np.einsum("l,blc->bc", layout.weights, u_nodes)
            if r > 0:
                nb = iter(ext)
                for col, off in enumerate(range(-r, r + 1)):
                    avg = own_avg if off == 0 else next(nb)
                    V[:, col] = stencil[:, col] - avg
            else:
                V[:, 0] = stencil[:, 0] - own_avg
        else:
            if cfg.order >= 3:
                res = solve_cells(model, layout, x_left, W, tol=cfg.newton_tol,
                                  max_iter=cfg.newton_max_iter,
                                  k_reuse=cfg.jacobian_reuse_k)
                states, wb = res.states_refined, res.ok.copy()
                own_avg = res.averages
                out.newton_iterations = res.iterations
                out.newton_residual = res.residual
            else:
                states, wb = _cauchy_from_center(model, layout, x_left, W)
                own_avg = quad_average(layout, states)
            if r > 0:
                ext_r, ok_r = extend_averages(model, layout, x_left + dx,
                                              states[:, -1], r, +1)
                ext_l, ok_l = extend_averages(model, layout, x_left,
                                              states[:, 0], r, -1)
                wb &= ok_r & ok_l
            ustar_nodes = np.where(wb[:, None, None],
                                   states[:, layout.quad_index_refined], 0.0)
            ustar_l = np.where(wb[:, None], states[:, 0], 0.0)
            ustar_r = np.where(wb[:, None], states[:, -1], 0.0)
            for col, off in enumerate(range(-r, r + 1)):
                if off == 0:
                    avg = own_avg
                elif off < 0:
                    avg = ext_l[:, -off - 1]
                else:
                    avg = ext_r[:, off - 1]
                V[:, col] = stencil[:, col] - avg
        # fallback cells reconstruct the raw averages
        V = np.where(wb[:, None, None], V, stencil)

    coeffs = standard_coeffs(op, V, dx, eps=cfg.cweno_eps,
                             exponent=cfg.cweno_exponent)
    out.wb_active = wb
    out.ustar_at_nodes = ustar_nodes
    out.ustar_left = ustar_l
    out.ustar_right = ustar_r
    out.p_at_nodes = ustar_nodes + eval_coeffs(coeffs, node_xi)
    out.u_plus_left = ustar_l + eval_coeffs(coeffs, -edge_xi)
    out.u_minus_right = ustar_r + eval_coeffs(coeffs, edge_xi)
    return out


def wb_reconstruct(model, layout: CellQuadratureLayout, x_left, stencil_values,
                   cfg: SimulationConfig) -> WBReconstruction:
    """Single-cell well-balanced reconstruction."""
    stencil = np.asarray(stencil_values, dtype=float)[None, ...]
    return wb_reconstruct_batch(model, layout,
                                np.atleast_1d(float(x_left)), stencil, cfg).cell(0)
