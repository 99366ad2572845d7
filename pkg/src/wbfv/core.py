"""Grids, cell quadrature layouts and run configuration.

A uniform grid of cells [x_{i-1/2}, x_{i+1/2}] carries one quadrature rule
for cell averages (midpoint for first/second order, two-point Gauss for
third order).  Each cell also carries a submesh used by the RK4 marches of
the equilibrium machinery: the cell edges and the quadrature nodes are
anchors, and every interval between consecutive anchors is split into n_p
uniform subintervals.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "Grid",
    "QuadratureRule",
    "CellQuadratureLayout",
    "build_layout",
    "Scheme",
    "BoundarySpec",
    "free_bc",
    "dirichlet_state",
    "dirichlet_components",
    "SimulationConfig",
    "read_config_file",
    "apply_overrides",
]


class QuadratureRule(Enum):
    MIDPOINT = "midpoint"
    GAUSS2 = "gauss2"


class Scheme(Enum):
    SM = "sm"        # standard reconstruction, quadrature source
    WBM = "wbm"      # well balanced, closed-form equilibria
    DWBM = "dwbm"    # well balanced, discrete (RK4 + Newton) equilibria


@dataclass(frozen=True)
class Grid:
    """Uniform 1D grid with n_cells cells on [a, b]."""

    a: float
    b: float
    n_cells: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.b <= self.a:
            raise ValueError(f"bad interval [{self.a}, {self.b}]")
        if self.n_cells < 1:
            raise ValueError("n_cells must be >= 1")

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.n_cells

    def left_edge(self, i) -> np.ndarray | float:
        """Left edge of cell i; i may be an array and may index ghost cells."""
        return self.a + np.asarray(i) * self.dx

    @property
    def left_edges(self) -> np.ndarray:
        return self.a + np.arange(self.n_cells) * self.dx

    @property
    def centers(self) -> np.ndarray:
        return self.left_edges + 0.5 * self.dx

    @property
    def interfaces(self) -> np.ndarray:
        return self.a + np.arange(self.n_cells + 1) * self.dx


def _node_offsets(rule: QuadratureRule, dx: float):
    if rule is QuadratureRule.MIDPOINT:
        offsets = np.array([0.5 * dx])
        weights = np.array([1.0])
    elif rule is QuadratureRule.GAUSS2:
        r = 0.5 / np.sqrt(3.0)
        offsets = np.array([(0.5 - r) * dx, (0.5 + r) * dx])
        weights = np.array([0.5, 0.5])
    else:  # pragma: no cover
        raise ValueError(f"unknown rule {rule}")
    return offsets, weights


@dataclass(frozen=True)
class CellQuadratureLayout:
    """Per-cell quadrature nodes/weights plus the RK4 submesh containing them.

    All offsets are relative to the cell's left edge.  ``submesh_offsets``
    has n_p*(M+2) + 1 nodes for M+1 quadrature nodes; ``refined_offsets``
    inserts the midpoint of every submesh interval (the state integrator
    always marches on the refined mesh so the adjoint, marching on the
    plain submesh, finds stored state values at all of its RK4 stage
    points).
    """

    rule: QuadratureRule
    n_p: int
    dx: float
    weights: np.ndarray
    node_offsets: np.ndarray
    submesh_offsets: np.ndarray
    refined_offsets: np.ndarray
    quad_index_submesh: np.ndarray
    quad_index_refined: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.node_offsets)

    def cell_nodes(self, x_left):
        """Quadrature node positions for cells with the given left edges."""
        x = np.asarray(x_left, dtype=float)
        return x[..., None] + self.node_offsets

    def cell_submesh(self, x_left):
        x = np.asarray(x_left, dtype=float)
        return x[..., None] + self.submesh_offsets


def build_layout(grid: Grid, rule: QuadratureRule, n_p: int) -> CellQuadratureLayout:
    """Build the quadrature-plus-submesh layout shared by all cells."""
    if n_p < 1:
        raise ValueError("n_p must be >= 1")
    dx = grid.dx
    offsets, weights = _node_offsets(rule, dx)
    anchors = np.concatenate(([0.0], offsets, [dx]))
    pieces = [np.array([0.0])]
    for k in range(len(anchors) - 1):
        seg = np.linspace(anchors[k], anchors[k + 1], n_p + 1)
        pieces.append(seg[1:])
    submesh = np.concatenate(pieces)
    refined = np.empty(2 * len(submesh) - 1)
    refined[::2] = submesh
    refined[1::2] = 0.5 * (submesh[:-1] + submesh[1:])
    # anchor k+1 (the k-th quadrature node) sits at submesh index (k+1)*n_p
    qidx = np.array([(k + 1) * n_p for k in range(len(offsets))])
    return CellQuadratureLayout(
        rule=rule,
        n_p=n_p,
        dx=dx,
        weights=weights,
        node_offsets=offsets,
        submesh_offsets=submesh,
        refined_offsets=refined,
        quad_index_submesh=qidx,
        quad_index_refined=2 * qidx,
    )


# ---------------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary treatment for one side of the domain.

    kind:
      - "free": ghost averages copy the nearest interior average.
      - "dirichlet_state": full state prescribed at the boundary; ghost
        averages are the cell averages of the stationary solution through
        that state (computed with the same integrator/quadrature as the
        scheme, so equilibria survive the boundary).
      - "dirichlet_components": ghost averages copy the interior, then the
        listed components are overwritten with prescribed values.
    """

    kind: str
    state: tuple | None = None
    components: tuple | None = None  # ((index, value), ...)

    def __post_init__(self):
        if self.kind not in ("free", "dirichlet_state", "dirichlet_components"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")


def free_bc() -> BoundarySpec:
    return BoundarySpec(kind="free")


def dirichlet_state(state) -> BoundarySpec:
    return BoundarySpec(kind="dirichlet_state", state=tuple(float(s) for s in state))


def dirichlet_components(components: dict) -> BoundarySpec:
    comps = tuple(sorted((int(k), float(v)) for k, v in components.items()))
    return BoundarySpec(kind="dirichlet_components", components=comps)


# ---------------------------------------------------------------------------
# run configuration


_ORDER_RULE = {1: QuadratureRule.MIDPOINT, 2: QuadratureRule.MIDPOINT, 3: QuadratureRule.GAUSS2}


@dataclass(frozen=True)
class SimulationConfig:
    """Everything a solver run needs besides the model, grid and data."""

    order: int = 1
    scheme: Scheme = Scheme.DWBM
    cfl: float = 0.9
    t_end: float = 1.0
    n_p: int = 1
    newton_tol: float = 1e-8
    newton_max_iter: int = 20
    jacobian_reuse_k: int = 1
    cweno_eps: float = 1e-6
    cweno_exponent: int = 2
    left_bc: BoundarySpec = field(default_factory=free_bc)
    right_bc: BoundarySpec = field(default_factory=free_bc)
    output_times: tuple = ()

    def __post_init__(self):
        if self.order not in (1, 2, 3):
            raise ValueError("order must be 1, 2 or 3")
        if self.cfl <= 0 or self.n_p < 1 or self.newton_tol <= 0:
            raise ValueError("bad config values")
        if self.newton_max_iter < 1 or self.jacobian_reuse_k < 1:
            raise ValueError("bad Newton iteration limits")

    @property
    def rule(self) -> QuadratureRule:
        return _ORDER_RULE[self.order]

    def with_(self, **kw) -> "SimulationConfig":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# config files: plain "key = value" lines, '#' comments

_CONFIG_KEYS = {
    "scheme": str,
    "order": int,
    "cells": int,
    "cfl": float,
    "t_end": float,
    "np": int,
    "newton_tol": float,
    "newton_max_iter": int,
    "k_reuse": int,
    "scenario": str,
    "output_dir": str,
}


def read_config_file(path) -> dict:
    """Parse a run configuration file into a {key: typed value} dict."""
    values = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](val)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad value for {key}: {val!r}") from exc
    return values


def apply_overrides(file_values: dict, overrides: dict) -> dict:
    """File values first, CLI overrides win; None overrides are skipped."""
    merged = dict(file_values)
    for key, val in overrides.items():
        if val is not None:
            merged[key] = val
    return merged
