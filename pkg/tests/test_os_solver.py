import numpy as np
import pytest

from stopctrl import (catalog, cross_validate_vx, extract_boundaries,
                      make_grid, solve_vi, solve_vx_os)
from stopctrl.faults import SolverFault


def _flat_gradient_model(slope):
    # zero reversion and zero discounting make the gradient problem's
    # rate lambda = r - mu' vanish identically; with constant h_x = slope
    # the uncapped solution is u = slope * (T - t), x-free. The flow
    # floor keeps theta positive on the window, so no stopping region
    # forms and absorption stays pinned at the window's low edge.
    return catalog("ou-quadratic", {"r": 0.0, "kappa": 0.0, "c": 0.0,
                                    "h_slope": slope, "h_const": 10.0,
                                    "g0": 0.0})


def test_flat_gradient_closed_form():
    model = _flat_gradient_model(0.8)
    grid = make_grid(model, -6.0, 6.0, 120, 120)
    surf = solve_vi(model, grid, check_assumptions=False)
    fb = extract_boundaries(surf)
    assert not fb.a_defined.any()
    oss = solve_vx_os(model, grid, fb)

    # compare mid-window, far from the absorbing low edge: the edge's
    # influence decays like a Gaussian tail over 6 / (0.4 sqrt(T)) sigmas;
    # the cap at alpha0 binds for t <= T - alpha0/slope, the linear branch
    # takes over after it
    i_mid = grid.nx // 2
    t = grid.t_nodes()
    expected = np.minimum(model.alpha0, 0.8 * (model.T - t))
    got = oss.u[:, i_mid]
    assert float(np.abs(got - expected).max()) <= 1e-8


def test_cap_and_absorption(ou_cache):
    oss = ou_cache.os_surface(200)
    fb = ou_cache.fb(200)
    model = oss.model
    assert float(oss.u.max()) <= model.alpha0 + 1e-12
    assert float(oss.u.min()) >= -1e-12
    # absorbed prefixes carry the Dirichlet datum
    for j in (0, oss.grid.nt // 2):
        k = oss.absorb_index[j]
        assert np.all(oss.u[j, :k + 1] == 0.0)
        if fb.a_defined[j]:
            assert oss.grid.x_nodes()[k] <= fb.a[j] + oss.grid.dx


def test_gradient_agrees_with_value_surface(ou_cache):
    surf = ou_cache.surface(200)
    oss = ou_cache.os_surface(200)
    fb = ou_cache.fb(200)
    gap_entry, b_entry = cross_validate_vx(surf, oss, fb)
    assert b_entry["pass"] is True
    assert gap_entry["defects"][0] <= 0.1 * surf.model.alpha0


def test_rate_step_cap_faults():
    # huge mean reversion blows lambda = r + kappa past the step cap
    model = catalog("ou-quadratic", {"kappa": 80.0})
    lo, hi = -0.5, 1.5
    grid = make_grid(model, lo, hi, 64, 64)
    surf = solve_vi(model, grid, check_assumptions=False)
    fb = extract_boundaries(surf)
    with pytest.raises(SolverFault):
        solve_vx_os(model, grid, fb)


def test_grid_mismatch_rejected(ou_cache, ou_model):
    fb = ou_cache.fb(200)
    other = make_grid(ou_model, ou_cache.x_lo, ou_cache.x_hi, 100, 100)
    with pytest.raises(ValueError):
        solve_vx_os(ou_model, other, fb)
