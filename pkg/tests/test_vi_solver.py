import numpy as np
import pytest

from stopctrl import (REGION_ACTION, REGION_INTERIOR, REGION_STOP,
                      catalog, default_window, make_grid, residual_report,
                      solve_vi, solve_vi_penalty)
from stopctrl.faults import AssumptionError


def test_always_stop_game_is_the_obstacle():
    # no running payoff, no discounting: waiting earns nothing, so the
    # value is the constant stopping payoff everywhere
    model = catalog("ou-quadratic", {"r": 0.0, "c": 0.0})
    lo, hi = default_window(model)
    surf = solve_vi(model, make_grid(model, lo, hi, 64, 64))
    assert float(np.abs(surf.v - 1.0).max()) <= 1e-8


def test_pure_accrual_game_is_linear_in_time():
    # zero obstacle, constant flow, no discounting: v = h_const * (T - t)
    model = catalog("ou-quadratic", {"r": 0.0, "g0": 0.0, "c": 0.0,
                                     "h_const": 0.7})
    lo, hi = default_window(model)
    grid = make_grid(model, lo, hi, 64, 64)
    surf = solve_vi(model, grid)
    expected = 0.7 * (model.T - grid.t_nodes())[:, None]
    assert float(np.abs(surf.v - expected).max()) <= 1e-8


def test_solver_enforces_assumption_screen():
    model = catalog("ou-quadratic", {"sigma0": 0.0})
    lo, hi = default_window(model)
    with pytest.raises(AssumptionError):
        solve_vi(model, make_grid(model, lo, hi, 32, 32))


def test_surface_constraints(ou_surf_200):
    surf = ou_surf_200
    model = surf.model
    assert float((surf.g_vals[:, None] - surf.v).max()) <= 1e-8
    assert float(surf.dplus.max()) <= model.alpha0 + 1e-6 * model.alpha0
    assert float(surf.dplus.min()) >= -1e-6 * model.alpha0


def test_region_partition(ou_surf_200):
    region = ou_surf_200.region
    present = set(np.unique(region))
    assert present == {REGION_STOP, REGION_INTERIOR, REGION_ACTION}
    # every non-terminal level splits as stop | interior | action
    # from the bottom of the window upward
    for j in range(region.shape[0] - 1):
        row = region[j]
        changes = np.nonzero(row[1:] != row[:-1])[0]
        assert len(changes) <= 2
        assert np.all(np.diff(row[np.r_[0, changes + 1]]) > 0)


def test_residual_report(ou_surf_200):
    rep = residual_report(ou_surf_200)
    assert rep["interior_pde"] <= 1e-8
    assert rep["obstacle_violation"] <= 1e-10
    assert rep["gradient_violation"] <= 1e-6 * ou_surf_200.model.alpha0
    assert rep["region_counts"]["S"] > 0 and rep["region_counts"]["M"] > 0


def test_solve_is_deterministic(ou_model):
    lo, hi = default_window(ou_model)
    grid = make_grid(ou_model, lo, hi, 48, 48)
    a = solve_vi(ou_model, grid)
    b = solve_vi(ou_model, grid)
    assert np.array_equal(a.v, b.v)
    assert np.array_equal(a.region, b.region)


def test_penalty_solver_approaches_projection(ou_model):
    lo, hi = default_window(ou_model)
    grid = make_grid(ou_model, lo, hi, 48, 48)
    exact = solve_vi(ou_model, grid)
    gaps = []
    for eps in (1e-2, 1e-3):
        pen = solve_vi_penalty(ou_model, grid, eps)
        gaps.append(float(np.abs(pen.v - exact.v).max()))
    assert gaps[1] < gaps[0]
    assert gaps[1] < 5e-3
