"""Balance-law models: flux, source and the stationary-ODE machinery.

Each model describes a system U_t + f(U)_x = S(U) H_x(x) and exposes the
first-order form of its stationary problem,

    U_x = G(U, x),   G = Df(U)^{-1} S(U) H_x(x),

together with the analytic Jacobian grad_U G needed by the adjoint solver.
States are numpy arrays with the component axis last; every callback is
vectorized over arbitrary leading axes.

Models whose stationary ODE has invariant components (shallow water and
Euler: the momentum never changes) declare them, and models with
closed-form stationary solutions (Burgers with exponential equilibria,
the coupled Burgers system, shallow water through its implicit form)
provide exact equilibrium samplers keyed to the quadrature average.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "BalanceLawModel",
    "ReducedForm",
    "burgers1_model",
    "burgers2_model",
    "coupled_burgers_model",
    "shallow_water_model",
    "euler_gravity_model",
    "ALL_MODEL_FACTORIES",
]


def _identity(x):
    return np.asarray(x, dtype=float)


def _ones(x):
    return np.ones_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ReducedForm:
    """Lower-dimensional stationary ODE with the invariant components frozen.

    ``rhs``/``rhs_grad`` take the active sub-state (..., Na), the frozen
    invariant values (..., Ni) and positions x.
    """

    active: tuple
    invariant: tuple
    rhs: Callable
    rhs_grad: Callable


class BalanceLawModel:
    """Base class; concrete models fill in the callbacks."""

    name: str = "?"
    n_comp: int = 1
    component_names: tuple = ("u",)
    invariant_components: tuple = ()
    reduced: ReducedForm | None = None

    def __init__(self, potential=None, potential_x=None):
        self.potential = potential if potential is not None else _identity
        self.potential_x = potential_x if potential_x is not None else _ones

    # -- PDE side -----------------------------------------------------------
    def flux(self, U):
        raise NotImplementedError

    def flux_jacobian(self, U):
        raise NotImplementedError

    def source(self, U):
        raise NotImplementedError

    def max_wave_speed(self, U):
        raise NotImplementedError

    def hyperbolicity_margin(self, U):
        """Smallest |eigenvalue| of Df(U); zero means resonance."""
        raise NotImplementedError

    def admissible(self, U):
        U = np.asarray(U)
        return np.isfinite(U).all(axis=-1)

    # -- stationary ODE side --------------------------------------------------
    def stationary_rhs(self, U, x):
        raise NotImplementedError

    def stationary_rhs_grad(self, U, x):
        raise NotImplementedError

    def exact_equilibrium(self, nodes_x, weights, W):
        """Closed-form equilibrium through the quadrature average, or None.

        nodes_x: (B, L) quadrature node positions, weights: (L,), W: (B, N).
        Returns (sampler, ok) with sampler(x) -> (..., N) evaluating the
        stationary solution whose weighted node average equals W.
        """
        return None

    def exact_equilibrium_through(self, x0, U0):
        """Closed-form stationary solution through the point (x0, U0), or None.

        Returns sampler(x) -> (..., N).  Used for boundary ghost cells when
        the scheme works with exact equilibria.
        """
        return None

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


# ---------------------------------------------------------------------------


class _Burgers1(BalanceLawModel):
    """Burgers flux with S(u) = u^2: stationary solutions C e^{H(x)}."""

    name = "burgers1"
    n_comp = 1
    component_names = ("u",)

    def flux(self, U):
        u = U[..., 0]
        return 0.5 * (u * u)[..., None]

    def flux_jacobian(self, U):
        return U[..., None]

    def source(self, U):
        u = U[..., 0]
        return (u * u)[..., None]

    def max_wave_speed(self, U):
        return np.abs(U[..., 0])

    hyperbolicity_margin = max_wave_speed

    def stationary_rhs(self, U, x):
        hx = np.asarray(self.potential_x(x))
        return U * hx[..., None]

    def stationary_rhs_grad(self, U, x):
        hx = np.asarray(self.potential_x(x))
        return hx[..., None, None] * np.ones(U.shape + (1,))

    def exact_equilibrium(self, nodes_x, weights, W):
        exph = np.exp(self.potential(nodes_x))
        denom = np.einsum("l,bl->b", weights, exph)
        C = W[:, 0] / denom

        def sampler(x, C=C):
            x = np.asarray(x, dtype=float)
            c = C.reshape(C.shape + (1,) * (x.ndim - 1))
            return (c * np.exp(self.potential(x)))[..., None]

        return sampler, np.isfinite(C)

    def exact_equilibrium_through(self, x0, U0):
        C = float(np.asarray(U0)[0]) / np.exp(float(self.potential(x0)))

        def sampler(x):
            x = np.asarray(x, dtype=float)
            return (C * np.exp(self.potential(x)))[..., None]

        return sampler


class _Burgers2(BalanceLawModel):
    """Burgers flux with S(u) = sin(u): G = sin(u)/u, series near u = 0."""

    name = "burgers2"
    n_comp = 1
    component_names = ("u",)
    _SMALL = 1e-4

    def flux(self, U):
        u = U[..., 0]
        return 0.5 * (u * u)[..., None]

    def flux_jacobian(self, U):
        return U[..., None]

    def source(self, U):
        return np.sin(U[..., 0])[..., None]

    def max_wave_speed(self, U):
        return np.abs(U[..., 0])

    hyperbolicity_margin = max_wave_speed

    def _sinc(self, u):
        small = np.abs(u) < self._SMALL
        usafe = np.where(small, 1.0, u)
        u2 = u * u
        return np.where(small, 1.0 - u2 / 6.0 + u2 * u2 / 120.0, np.sin(usafe) / usafe)

    def _dsinc(self, u):
        small = np.abs(u) < self._SMALL
        usafe = np.where(small, 1.0, u)
        series = -u / 3.0 + u**3 / 30.0
        return np.where(small, series, (usafe * np.cos(usafe) - np.sin(usafe)) / usafe**2)

    def stationary_rhs(self, U, x):
        hx = np.asarray(self.potential_x(x))
        return self._sinc(U[..., 0])[..., None] * hx[..., None]

    def stationary_rhs_grad(self, U, x):
        hx = np.asarray(self.potential_x(x))
        return (self._dsinc(U[..., 0]) * hx)[..., None, None]


class _CoupledBurgers(BalanceLawModel):
    """Two Burgers equations coupled through quadratic sources.

    The stationary ODE is the constant-coefficient linear system
    U_x = A U H_x with A = [[2, 1], [-1, 3]].
    """

    name = "coupled_burgers"
    n_comp = 2
    component_names = ("u1", "u2")
    _A = np.array([[2.0, 1.0], [-1.0, 3.0]])

    def flux(self, U):
        return 0.5 * U * U

    def flux_jacobian(self, U):
        J = np.zeros(U.shape + (2,))
        J[..., 0, 0] = U[..., 0]
        J[..., 1, 1] = U[..., 1]
        return J

    def source(self, U):
        u1, u2 = U[..., 0], U[..., 1]
        S = np.empty_like(U)
        S[..., 0] = 2.0 * u1 * u1 + u1 * u2
        S[..., 1] = -u1 * u2 + 3.0 * u2 * u2
        return S

    def max_wave_speed(self, U):
        return np.abs(U).max(axis=-1)

    def hyperbolicity_margin(self, U):
        return np.abs(U).min(axis=-1)

    def stationary_rhs(self, U, x):
        hx = np.asarray(self.potential_x(x))
        return (U @ self._A.T) * hx[..., None]

    def stationary_rhs_grad(self, U, x):
        hx = np.asarray(self.potential_x(x))
        return hx[..., None, None] * self._A

    def _basis(self, x):
        """Two independent stationary solutions of U_x = A U (for H = x)."""
        x = np.asarray(x, dtype=float)
        e = np.exp(2.5 * x)
        w = np.sqrt(3.0) / 2.0
        c, s = np.cos(w * x), np.sin(w * x)
        phi1 = np.stack([e * c, 0.5 * e * c - w * e * s], axis=-1)
        phi2 = np.stack([e * s, w * e * c + 0.5 * e * s], axis=-1)
        return phi1, phi2

    def exact_equilibrium(self, nodes_x, weights, W):
        phi1, phi2 = self._basis(nodes_x)  # (B, L, 2)
        A = np.empty((W.shape[0], 2, 2))
        A[:, :, 0] = np.einsum("l,blc->bc", weights, phi1)
        A[:, :, 1] = np.einsum("l,blc->bc", weights, phi2)
        ok = np.abs(np.linalg.det(A)) > 1e-300
        Asafe = np.where(ok[:, None, None], A, np.eye(2))
        ab = np.linalg.solve(Asafe, W[..., None])[..., 0]

        def sampler(x, ab=ab):
            x = np.asarray(x, dtype=float)
            p1, p2 = self._basis(x)
            a = ab[:, 0].reshape(ab.shape[:1] + (1,) * (x.ndim - 1) + (1,))
            b = ab[:, 1].reshape(a.shape)
            return a * p1 + b * p2

        return sampler, ok

    def exact_equilibrium_through(self, x0, U0):
        phi1, phi2 = self._basis(float(x0))
        a, b = np.linalg.solve(np.stack([phi1, phi2], axis=-1),
                               np.asarray(U0, dtype=float))

        def sampler(x):
            p1, p2 = self._basis(x)
            return a * p1 + b * p2

        return sampler


class _ShallowWater(BalanceLawModel):
    """Shallow water over topography; H(x) is the depth profile."""

    name = "shallow_water"
    n_comp = 2
    component_names = ("h", "q")
    invariant_components = (1,)

    def __init__(self, g=9.81, potential=None, potential_x=None):
        super().__init__(potential, potential_x)
        self.g = float(g)
        self.reduced = ReducedForm(
            active=(0,), invariant=(1,),
            rhs=self._reduced_rhs, rhs_grad=self._reduced_grad,
        )

    def flux(self, U):
        h, q = U[..., 0], U[..., 1]
        F = np.empty_like(U)
        F[..., 0] = q
        F[..., 1] = q * q / h + 0.5 * self.g * h * h
        return F

    def flux_jacobian(self, U):
        h, q = U[..., 0], U[..., 1]
        u = q / h
        J = np.empty(U.shape + (2,))
        J[..., 0, 0] = 0.0
        J[..., 0, 1] = 1.0
        J[..., 1, 0] = self.g * h - u * u
        J[..., 1, 1] = 2.0 * u
        return J

    def source(self, U):
        S = np.zeros_like(U)
        S[..., 1] = self.g * U[..., 0]
        return S

    def max_wave_speed(self, U):
        h, q = U[..., 0], U[..., 1]
        return np.abs(q / h) + np.sqrt(self.g * h)

    def hyperbolicity_margin(self, U):
        h, q = U[..., 0], U[..., 1]
        c = np.sqrt(self.g * h)
        u = q / h
        return np.minimum(np.abs(u - c), np.abs(u + c))

    def admissible(self, U):
        U = np.asarray(U)
        return np.isfinite(U).all(axis=-1) & (U[..., 0] > 0.0)

    def froude(self, U):
        h, q = U[..., 0], U[..., 1]
        return np.abs(q / h) / np.sqrt(self.g * h)

    def stationary_rhs(self, U, x):
        hx = np.asarray(self.potential_x(x))
        h, q = U[..., 0], U[..., 1]
        h3 = h * h * h
        G = np.zeros_like(U)
        G[..., 0] = self.g * h3 * hx / (self.g * h3 - q * q)
        return G

    def stationary_rhs_grad(self, U, x):
        hx = np.asarray(self.potential_x(x))
        h, q = U[..., 0], U[..., 1]
        den = self.g * h * h * h - q * q
        J = np.zeros(U.shape + (2,))
        J[..., 0, 0] = -3.0 * self.g * q * q * h * h * hx / (den * den)
        J[..., 0, 1] = 2.0 * self.g * q * h * h * h * hx / (den * den)
        return J

    def _reduced_rhs(self, Ua, Uinv, x):
        hx = np.asarray(self.potential_x(x))
        h = Ua[..., 0]
        q = Uinv[..., 0]
        h3 = h * h * h
        return (self.g * h3 * hx / (self.g * h3 - q * q))[..., None]

    def _reduced_grad(self, Ua, Uinv, x):
        hx = np.asarray(self.potential_x(x))
        h = Ua[..., 0]
        q = Uinv[..., 0]
        den = self.g * h * h * h - q * q
        return (-3.0 * self.g * q * q * h * h * hx / (den * den))[..., None, None]

    # -- implicit form: q = C1,  q^2/(2h^2) + g(h - H(x)) = C2 ---------------
    def critical_depth(self, q):
        return np.cbrt(np.asarray(q, dtype=float) ** 2 / self.g)

    def implicit_sample(self, x, c1, c2, branch):
        """Depth h(x) solving the implicit stationary relations.

        branch is "subcritical" (largest root) or "supercritical" (smaller
        positive root).  Returns (h, ok); ok is False where the cubic has
        no such root (the state does not exist for this topography).
        """
        x = np.asarray(x, dtype=float)
        c1 = np.broadcast_to(np.asarray(c1, dtype=float), x.shape)
        c2 = np.broadcast_to(np.asarray(c2, dtype=float), x.shape)
        K = c2 + self.g * np.asarray(self.potential(x))
        # g h^3 - K h^2 + c1^2/2 = 0  ->  h^3 + a h^2 + c = 0
        a = -K / self.g
        c = c1 * c1 / (2.0 * self.g)
        p = -a * a / 3.0
        qq = 2.0 * a**3 / 27.0 + c
        with np.errstate(all="ignore"):
            disc = (0.5 * qq) ** 2 + (p / 3.0) ** 3
            ok = disc < 0.0
            m = np.where(ok, np.sqrt(np.maximum(-p / 3.0, 0.0)), 1.0)
            arg = np.clip(1.5 * qq / (p * m), -1.0, 1.0)
            theta = np.arccos(arg)
            roots = [2.0 * m * np.cos(theta / 3.0 - 2.0 * np.pi * k / 3.0) - a / 3.0
                     for k in range(3)]
        roots = np.sort(np.stack(roots, axis=-1), axis=-1)
        if branch == "subcritical":
            h = roots[..., 2]
        elif branch == "supercritical":
            h = roots[..., 1]
        else:
            raise ValueError(f"unknown branch {branch!r}")
        ok = ok & (h > 0.0)
        return h, ok

    def exact_equilibrium(self, nodes_x, weights, W):
        hbar, qbar = W[:, 0], W[:, 1]
        hcrit = self.critical_depth(qbar)
        branch = np.where(hbar > hcrit, 1, -1)  # 1 subcritical, -1 supercritical
        names = {1: "subcritical", -1: "supercritical"}
        # Newton on the Bernoulli constant so the weighted node average is hbar
        xc = np.einsum("l,bl->b", weights, nodes_x)
        c2 = qbar**2 / (2.0 * hbar**2) + self.g * hbar - self.g * np.asarray(self.potential(xc))
        ok = np.ones(len(hbar), dtype=bool)
        for _ in range(60):
            h_nodes = np.empty_like(nodes_x)
            good = np.ones(len(hbar), dtype=bool)
            for sgn in (1, -1):
                rows = branch == sgn
                if rows.any():
                    h, okr = self.implicit_sample(
                        nodes_x[rows], qbar[rows, None], c2[rows, None], names[sgn])
                    h_nodes[rows] = h
                    good[rows] &= okr.all(axis=-1)
            ok &= good
            resid = np.einsum("l,bl->b", weights, h_nodes) - hbar
            if np.all(~ok | (np.abs(resid) <= 1e-13 * np.maximum(1.0, np.abs(hbar)))):
                break
            dh_dc2 = 1.0 / (self.g - qbar[:, None] ** 2 / h_nodes**3)
            slope = np.einsum("l,bl->b", weights, dh_dc2)
            c2 = c2 - np.where(ok, resid / slope, 0.0)

        def sampler(x, c2=c2, qbar=qbar, branch=branch):
            x = np.asarray(x, dtype=float)
            extra = (1,) * (x.ndim - 1)
            q = np.broadcast_to(qbar.reshape(qbar.shape + extra), x.shape)
            cc = np.broadcast_to(c2.reshape(c2.shape + extra), x.shape)
            out = np.empty(x.shape + (2,))
            for sgn in (1, -1):
                rows = branch == sgn
                if rows.any():
                    h, _ = self.implicit_sample(x[rows], q[rows], cc[rows], names[sgn])
                    out[rows, ..., 0] = h
            out[..., 1] = q
            return out

        return sampler, ok

    def exact_equilibrium_through(self, x0, U0):
        h0, q0 = float(U0[0]), float(U0[1])
        c2 = q0 * q0 / (2.0 * h0 * h0) + self.g * h0 - self.g * float(self.potential(x0))
        branch = "subcritical" if h0 > self.critical_depth(q0) else "supercritical"

        def sampler(x):
            x = np.asarray(x, dtype=float)
            h, _ = self.implicit_sample(x, q0, c2, branch)
            out = np.empty(x.shape + (2,))
            out[..., 0] = h
            out[..., 1] = q0
            return out

        return sampler


class _EulerGravity(BalanceLawModel):
    """1D Euler equations with gravity source; H(x) is the potential."""

    name = "euler_gravity"
    n_comp = 3
    component_names = ("rho", "q", "E")
    invariant_components = (1,)

    def __init__(self, gamma=1.5, potential=None, potential_x=None):
        super().__init__(potential, potential_x)
        self.gamma = float(gamma)
        self.reduced = ReducedForm(
            active=(0, 2), invariant=(1,),
            rhs=self._reduced_rhs, rhs_grad=self._reduced_grad,
        )

    def pressure(self, U):
        rho, q, E = U[..., 0], U[..., 1], U[..., 2]
        return (self.gamma - 1.0) * (E - 0.5 * q * q / rho)

    def sound_speed_sq(self, U):
        return self.gamma * self.pressure(U) / U[..., 0]

    def flux(self, U):
        rho, q, E = U[..., 0], U[..., 1], U[..., 2]
        u = q / rho
        p = self.pressure(U)
        F = np.empty_like(U)
        F[..., 0] = q
        F[..., 1] = q * u + p
        F[..., 2] = u * (E + p)
        return F

    def flux_jacobian(self, U):
        g = self.gamma
        rho, q, E = U[..., 0], U[..., 1], U[..., 2]
        u = q / rho
        p = self.pressure(U)
        J = np.empty(U.shape + (3,))
        J[..., 0, 0] = 0.0
        J[..., 0, 1] = 1.0
        J[..., 0, 2] = 0.0
        J[..., 1, 0] = 0.5 * (g - 3.0) * u * u
        J[..., 1, 1] = (3.0 - g) * u
        J[..., 1, 2] = g - 1.0
        J[..., 2, 0] = -u * (E + p) / rho + 0.5 * (g - 1.0) * u**3
        J[..., 2, 1] = (E + p) / rho - (g - 1.0) * u * u
        J[..., 2, 2] = g * u
        return J

    def source(self, U):
        S = np.zeros_like(U)
        S[..., 1] = -U[..., 0]
        S[..., 2] = -U[..., 1]
        return S

    def max_wave_speed(self, U):
        u = U[..., 1] / U[..., 0]
        c = np.sqrt(self.sound_speed_sq(U))
        return np.abs(u) + c

    def hyperbolicity_margin(self, U):
        u = U[..., 1] / U[..., 0]
        c = np.sqrt(self.sound_speed_sq(U))
        return np.minimum(np.abs(u), np.minimum(np.abs(u - c), np.abs(u + c)))

    def admissible(self, U):
        U = np.asarray(U)
        with np.errstate(all="ignore"):
            return (np.isfinite(U).all(axis=-1) & (U[..., 0] > 0.0)
                    & (self.pressure(U) > 0.0))

    def stationary_rhs(self, U, x):
        hx = np.asarray(self.potential_x(x))
        rho, q, E = U[..., 0], U[..., 1], U[..., 2]
        u2 = (q / rho) ** 2
        D = self.sound_speed_sq(U) - u2
        G = np.zeros_like(U)
        G[..., 0] = -rho / D * hx
        G[..., 2] = -(rho / (self.gamma - 1.0)) * (1.0 + 0.5 * (3.0 - self.gamma) * u2 / D) * hx
        return G

    def stationary_rhs_grad(self, U, x):
        g = self.gamma
        hx = np.asarray(self.potential_x(x))
        rho, q, E = U[..., 0], U[..., 1], U[..., 2]
        den = g * (g - 1.0) * (2.0 * E * rho - q * q) - 2.0 * q * q  # = 2 rho^2 (c^2 - u^2)
        den2 = den * den
        J = np.zeros(U.shape + (3,))
        J[..., 0, 0] = 2.0 * rho**2 * (g * (g - 1.0) * q * q
                                       - 2.0 * g * (g - 1.0) * (2.0 * E * rho - q * q)
                                       + 6.0 * q * q) / den2 * hx
        J[..., 0, 1] = -4.0 * q * rho**3 * (g * (g - 1.0) + 2.0) / den2 * hx
        J[..., 0, 2] = 4.0 * g * (g - 1.0) * rho**4 / den2 * hx
        J[..., 2, 0] = -(2.0 * E * g * q * q * rho * (g - 3.0) * (g - 1.0)
                         - den * (-g * (g - 1.0) * (2.0 * E * rho - q * q)
                                  + (g - 1.0) * q * q)) / ((g - 1.0) * den2) * hx
        J[..., 2, 1] = 2.0 * q * rho * (g - 3.0) * (g * (g - 1.0) * (2.0 * E * rho - q * q)
                                                    + q * q * (g * (g - 1.0) + 2.0)
                                                    - 2.0 * q * q) / ((g - 1.0) * den2) * hx
        J[..., 2, 2] = -2.0 * g * q * q * rho**2 * (g - 3.0) / den2 * hx
        return J

    def _expand(self, Ua, Uinv):
        U = np.empty(Ua.shape[:-1] + (3,))
        U[..., 0] = Ua[..., 0]
        U[..., 1] = Uinv[..., 0]
        U[..., 2] = Ua[..., 1]
        return U

    def _reduced_rhs(self, Ua, Uinv, x):
        G = self.stationary_rhs(self._expand(Ua, Uinv), x)
        return G[..., (0, 2)]

    def _reduced_grad(self, Ua, Uinv, x):
        J = self.stationary_rhs_grad(self._expand(Ua, Uinv), x)
        return J[..., (0, 2), :][..., :, (0, 2)]


def burgers1_model(potential=None, potential_x=None) -> BalanceLawModel:
    return _Burgers1(potential, potential_x)


def burgers2_model(potential=None, potential_x=None) -> BalanceLawModel:
    return _Burgers2(potential, potential_x)


def coupled_burgers_model() -> BalanceLawModel:
    return _CoupledBurgers()


def shallow_water_model(g=9.81, potential=None, potential_x=None) -> BalanceLawModel:
    return _ShallowWater(g, potential, potential_x)


def euler_gravity_model(gamma=1.5, potential=None, potential_x=None) -> BalanceLawModel:
    return _EulerGravity(gamma, potential, potential_x)


ALL_MODEL_FACTORIES = {
    "burgers1": burgers1_model,
    "burgers2": burgers2_model,
    "coupled_burgers": coupled_burgers_model,
    "shallow_water": shallow_water_model,
    "euler_gravity": euler_gravity_model,
}
