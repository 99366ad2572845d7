"""Numerical flux, ghost cells, semidiscrete scheme and time stepping."""

import math

import numpy as np
import pytest

import wbfv.solver
from wbfv import (
    GaussianBump,
    Grid,
    Scheme,
    SimulationConfig,
    build_layout,
    dirichlet_components,
    dirichlet_state,
    free_bc,
    perturbed_ic,
    run,
    rusanov_flux,
    semidiscrete_rhs,
    stationary_ic,
    write_snapshot,
)
from wbfv.models import burgers1_model, shallow_water_model
from wbfv.solver import GhostCells, build_ghosts, cfl_dt, pad_with_ghosts, tvd_rk3_step


def _zeros(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def flat_burgers():
    return burgers1_model(potential=_zeros, potential_x=_zeros)


def test_rusanov_flux_values():
    model = burgers1_model()
    # consistency: equal states give the exact flux
    U = np.array([[2.0], [0.3]])
    np.testing.assert_array_equal(rusanov_flux(model, U, U), model.flux(U))
    # 0.5 (f(2) + f(0)) - 0.5 * 2 * (0 - 2) = 1 + 2 = 3
    f = rusanov_flux(model, np.array([2.0]), np.array([0.0]))
    assert f[0] == pytest.approx(3.0, rel=1e-15)
    # dissipation pushes the flux below the average for increasing data
    f = rusanov_flux(model, np.array([1.0]), np.array([3.0]))
    assert f[0] == pytest.approx(0.5 * (0.5 + 4.5) - 0.5 * 3.0 * 2.0,
                                 rel=1e-15)

    sw = shallow_water_model()
    state = np.array([2.0, 3.5])
    np.testing.assert_allclose(rusanov_flux(sw, state, state),
                               [3.5, 3.5**2 / 2.0 + 0.5 * 9.81 * 4.0],
                               rtol=1e-15)


def test_cfl_dt():
    model = burgers1_model()
    grid = Grid(0.0, 1.0, 10)
    cfg = SimulationConfig(order=1, cfl=0.45)
    U = np.array([[2.0], [-3.0]])
    assert cfl_dt(model, grid, cfg, U, 0.0, 1.0) == pytest.approx(
        0.45 * 0.1 / 3.0, rel=1e-15)
    # the step is capped to land exactly on the stop time
    assert cfl_dt(model, grid, cfg, U, 0.0, 1e-6) == 1e-6
    # zero wave speed: jump straight to the stop
    assert cfl_dt(model, grid, cfg, np.array([[0.0]]), 0.25, 1.0) == 0.75
    with pytest.raises(RuntimeError, match="wave speed"):
        cfl_dt(model, grid, cfg, np.array([[np.nan]]), 0.0, 1.0)


def test_tvd_rk3_taylor_coefficients(monkeypatch):
    # with rhs = -U the step must realize 1 - dt + dt^2/2 - dt^3/6 exactly
    def decay_rhs(model, layout, grid, cfg, padded):
        return -padded[2:-2], {"newton_max": 0, "fallback_cells": 0}

    monkeypatch.setattr(wbfv.solver, "semidiscrete_rhs", decay_rhs)
    model = flat_burgers()
    grid = Grid(0.0, 1.0, 4)
    cfg = SimulationConfig(order=1, scheme=Scheme.SM)
    layout = build_layout(grid, cfg.rule, cfg.n_p)
    U = np.ones((4, 1))
    for dt in (0.1, 0.05):
        stepped = tvd_rk3_step(model, layout, grid, cfg, U, dt,
                               GhostCells(None, None))
        want = 1.0 - dt + dt * dt / 2.0 - dt**3 / 6.0
        np.testing.assert_allclose(stepped, want, rtol=0, atol=1e-15)
    # third-order truncation error against the exponential
    gap = abs((1.0 - 0.1 + 0.005 - 1e-3 / 6.0) - math.exp(-0.1))
    assert 3e-6 < gap < 6e-6


@pytest.mark.parametrize("scheme", [Scheme.SM, Scheme.DWBM])
def test_first_order_conservation_telescopes(scheme):
    # flat potential, free boundaries: the total update reduces to the
    # boundary flux difference
    model = flat_burgers()
    grid = Grid(0.0, 1.0, 8)
    cfg = SimulationConfig(order=1, scheme=scheme)
    layout = build_layout(grid, cfg.rule, cfg.n_p)
    rng = np.random.default_rng(12)
    U = rng.uniform(0.5, 2.0, (8, 1))
    padded = pad_with_ghosts(model, layout, grid, cfg, U,
                             build_ghosts(model, layout, grid, cfg))
    rhs, info = semidiscrete_rhs(model, layout, grid, cfg, padded)
    total = rhs.sum(axis=0) * grid.dx
    want = -(model.flux(U[-1]) - model.flux(U[0]))
    np.testing.assert_allclose(total, want, rtol=0, atol=1e-12)
    assert info["newton_iterations"].shape == (8,)
    assert info["fallback_cells"] == 0


def test_dirichlet_state_ghosts_continue_the_equilibrium():
    model = burgers1_model()
    grid = Grid(0.0, 1.0, 10)
    cfg = SimulationConfig(order=3, scheme=Scheme.DWBM,
                           left_bc=dirichlet_state([2.0]),
                           right_bc=dirichlet_state([2.0 * math.e]))
    layout = build_layout(grid, cfg.rule, cfg.n_p)
    ghosts = build_ghosts(model, layout, grid, cfg)
    dx = grid.dx
    # quadrature average of e^x over one cell, relative to its left edge
    growth = layout.weights @ np.exp(layout.node_offsets)
    # left ghosts hold averages of 2 e^x over [-dx, 0] and [-2dx, -dx]
    for k in range(2):
        want = 2.0 * math.exp(-(k + 1) * dx) * growth
        assert ghosts.left[k, 0] == pytest.approx(want, abs=1e-8)
        want = 2.0 * math.exp(1.0 + k * dx) * growth
        assert ghosts.right[k, 0] == pytest.approx(want, abs=1e-8)
    # and they land in the padded array outward-in
    U = stationary_ic(model, grid, layout, np.array([2.0]))
    padded = pad_with_ghosts(model, layout, grid, cfg, U, ghosts)
    np.testing.assert_array_equal(padded[1], ghosts.left[0])
    np.testing.assert_array_equal(padded[0], ghosts.left[1])
    np.testing.assert_array_equal(padded[-2], ghosts.right[0])
    np.testing.assert_array_equal(padded[-1], ghosts.right[1])


def test_free_ghosts_extrapolate_for_the_standard_scheme():
    model = burgers1_model()
    grid = Grid(0.0, 1.0, 5)
    layout = build_layout(grid, SimulationConfig(order=2).rule, 1)

    # order 2 continues linear-in-index data exactly
    cfg = SimulationConfig(order=2, scheme=Scheme.SM)
    U = (5.0 + 3.0 * np.arange(5))[:, None]
    padded = pad_with_ghosts(model, layout, grid, cfg, U,
                             GhostCells(None, None))
    np.testing.assert_array_equal(padded[:, 0],
                                  5.0 + 3.0 * np.arange(-2, 7))

    # order 3 continues quadratic-in-index data exactly
    cfg = SimulationConfig(order=3, scheme=Scheme.SM)
    layout3 = build_layout(grid, cfg.rule, cfg.n_p)
    U = ((np.arange(5) + 1.0) ** 2)[:, None]
    padded = pad_with_ghosts(model, layout3, grid, cfg, U,
                             GhostCells(None, None))
    np.testing.assert_array_equal(padded[:, 0], (np.arange(-2, 7) + 1.0) ** 2)

    # order 1 copies the boundary average
    cfg = SimulationConfig(order=1, scheme=Scheme.SM)
    U = (5.0 + 3.0 * np.arange(5))[:, None]
    padded = pad_with_ghosts(model, layout, grid, cfg, U,
                             GhostCells(None, None))
    np.testing.assert_array_equal(padded[0], U[0])
    np.testing.assert_array_equal(padded[1], U[0])
    np.testing.assert_array_equal(padded[-1], U[-1])


def test_free_ghost_extrapolation_guards_admissibility():
    model = shallow_water_model()
    grid = Grid(0.0, 1.0, 3)
    cfg = SimulationConfig(order=2, scheme=Scheme.SM)
    layout = build_layout(grid, cfg.rule, cfg.n_p)
    # 2 h_0 - h_1 < 0: the linear extension would go dry, so copy instead
    U = np.array([[0.2, 0.1], [0.6, 0.1], [0.7, 0.1]])
    padded = pad_with_ghosts(model, layout, grid, cfg, U,
                             GhostCells(None, None))
    np.testing.assert_array_equal(padded[0], U[0])
    np.testing.assert_array_equal(padded[1], U[0])
    # the healthy right side still extrapolates
    np.testing.assert_allclose(padded[-2, 0], 0.8, rtol=1e-14)


def test_free_ghosts_continue_equilibrium_for_wb_schemes():
    model = burgers1_model()
    grid = Grid(0.0, 1.0, 10)
    cfg = SimulationConfig(order=3, scheme=Scheme.DWBM, newton_tol=1e-13)
    layout = build_layout(grid, cfg.rule, cfg.n_p)
    U = stationary_ic(model, grid, layout, np.array([1.0]))
    padded = pad_with_ghosts(model, layout, grid, cfg, U,
                             GhostCells(None, None))
    dx = grid.dx
    growth = layout.weights @ np.exp(layout.node_offsets)
    for k in range(2):
        want = math.exp(-(k + 1) * dx) * growth
        assert padded[1 - k, 0] == pytest.approx(want, abs=1e-7)
        want = math.exp(1.0 + k * dx) * growth
        assert padded[-2 + k, 0] == pytest.approx(want, abs=1e-7)


def test_dirichlet_components_pin_selected_entries():
    model = shallow_water_model()
    grid = Grid(0.0, 1.0, 4)
    cfg = SimulationConfig(order=2, scheme=Scheme.SM,
                           left_bc=dirichlet_components({1: 0.1}),
                           right_bc=dirichlet_components({0: 1.0}))
    layout = build_layout(grid, cfg.rule, cfg.n_p)
    U = np.array([[2.0, 0.4], [2.1, 0.4], [2.2, 0.4], [2.3, 0.4]])
    padded = pad_with_ghosts(model, layout, grid, cfg, U,
                             GhostCells(None, None))
    np.testing.assert_array_equal(padded[0], [2.0, 0.1])
    np.testing.assert_array_equal(padded[1], [2.0, 0.1])
    np.testing.assert_array_equal(padded[-1], [1.0, 0.4])
    np.testing.assert_array_equal(padded[-2], [1.0, 0.4])


def test_stationary_averages_stay_put():
    model = burgers1_model()
    grid = Grid(-1.0, 1.0, 50)
    cfg = SimulationConfig(order=3, scheme=Scheme.DWBM, t_end=1.0, n_p=3,
                           left_bc=dirichlet_state([math.exp(-1.0)]),
                           right_bc=dirichlet_state([math.e]))
    layout = build_layout(grid, cfg.rule, cfg.n_p)
    W0 = stationary_ic(model, grid, layout, np.array([math.exp(-1.0)]))
    res = run(model, grid, layout, cfg, W0)
    assert res.diagnostics["steps"] > 0
    assert res.diagnostics["fallback_cells_max"] == 0
    assert np.abs(res.final - W0).max() <= 1e-11


def test_run_output_bookkeeping():
    model = burgers1_model()
    grid = Grid(-1.0, 1.0, 10)
    layout = build_layout(grid, SimulationConfig(order=1).rule, 1)
    W0 = stationary_ic(model, grid, layout, np.array([1.0]))

    frozen = SimulationConfig(order=1, scheme=Scheme.SM, t_end=0.0)
    res = run(model, grid, layout, frozen, W0)
    np.testing.assert_array_equal(res.times, [0.0])
    np.testing.assert_array_equal(res.final, W0)
    assert res.diagnostics["steps"] == 0

    cfg = SimulationConfig(order=1, scheme=Scheme.SM, t_end=0.2,
                           output_times=(0.05, 0.15, 0.9))
    res = run(model, grid, layout, cfg, W0)
    np.testing.assert_array_equal(res.times, [0.0, 0.05, 0.15, 0.2])
    assert res.at(0.15).shape == (10, 1)
    np.testing.assert_array_equal(res.at(0.0), W0)
    with pytest.raises(KeyError, match="no snapshot"):
        res.at(0.12)

    with pytest.raises(ValueError, match="n_cells"):
        run(model, grid, layout, cfg, W0[:-1])
    with pytest.raises(RuntimeError):
        run(model, grid, layout, cfg, np.full_like(W0, np.nan))


def test_runs_are_deterministic():
    model = burgers1_model()
    grid = Grid(-1.0, 1.0, 16)
    cfg = SimulationConfig(order=3, scheme=Scheme.DWBM, t_end=0.5,
                           left_bc=dirichlet_state([math.exp(-1.0)]),
                           right_bc=dirichlet_state([math.e]))
    layout = build_layout(grid, cfg.rule, cfg.n_p)
    base = stationary_ic(model, grid, layout, np.array([math.exp(-1.0)]))
    bump = GaussianBump(amplitude=0.3, decay=200.0, center=-0.5,
                        components=(0,))
    W0 = perturbed_ic(base, grid, layout, bump)
    first = run(model, grid, layout, cfg, W0)
    second = run(model, grid, layout, cfg, W0)
    np.testing.assert_array_equal(first.snapshots, second.snapshots)
    np.testing.assert_array_equal(first.times, second.times)
    assert first.diagnostics["steps"] == second.diagnostics["steps"]


def test_write_snapshot_round_trip(tmp_path):
    model = shallow_water_model(potential=np.sin, potential_x=np.cos)
    grid = Grid(0.0, 1.0, 5)
    rng = np.random.default_rng(4)
    U = np.stack([rng.uniform(1.0, 2.0, 5), rng.uniform(-1.0, 1.0, 5)],
                 axis=-1)
    path = write_snapshot(tmp_path / "state.txt", model, grid, U)
    first_line = path.read_text().splitlines()[0]
    assert first_line == "# x_center h q H"
    table = np.loadtxt(path)
    assert table.shape == (5, 4)
    np.testing.assert_array_equal(table[:, 0], grid.centers)
    np.testing.assert_array_equal(table[:, 1:3], U)
    np.testing.assert_array_equal(table[:, 3], np.sin(grid.centers))
