"""Shared fixtures: catalog models and a lazy cache of solved surfaces.

The heavy multi-resolution solves are shared across test modules through
one session-scoped cache, so each resolution is solved exactly once per
test run no matter how many tests touch it.
"""

import numpy as np
import pytest

from stopctrl import (catalog, default_window, extract_boundaries, make_grid,
                      solve_vi, solve_vx_os)


@pytest.fixture(scope="session")
def ou_model():
    return catalog("ou-quadratic")


@pytest.fixture(scope="session")
def hl_model():
    return catalog("halfline-linear")


class SolveCache:
    """Lazily solved square surfaces for one model, keyed by resolution."""

    def __init__(self, model, x_lo, x_hi):
        self.model = model
        self.x_lo = x_lo
        self.x_hi = x_hi
        self._store = {}

    def surface(self, n):
        if n not in self._store:
            grid = make_grid(self.model, self.x_lo, self.x_hi, n, n)
            surf = solve_vi(self.model, grid)
            self._store[n] = {"surf": surf, "fb": extract_boundaries(surf),
                              "os": None}
        return self._store[n]["surf"]

    def fb(self, n):
        self.surface(n)
        return self._store[n]["fb"]

    def os_surface(self, n):
        self.surface(n)
        if self._store[n]["os"] is None:
            entry = self._store[n]
            self._store[n]["os"] = solve_vx_os(self.model, entry["surf"].grid,
                                               entry["fb"])
        return self._store[n]["os"]

    def solved_resolutions(self):
        return sorted(self._store)


@pytest.fixture(scope="session")
def ou_cache(ou_model):
    lo, hi = default_window(ou_model)
    return SolveCache(ou_model, lo, hi)


@pytest.fixture(scope="session")
def hl_cache(hl_model):
    lo, hi = default_window(hl_model)
    return SolveCache(hl_model, lo, hi)


@pytest.fixture(scope="session")
def ou_surf_200(ou_cache):
    return ou_cache.surface(200)


@pytest.fixture(scope="session")
def ou_fb_200(ou_cache):
    return ou_cache.fb(200)


def interp_value(surface, t, x):
    """Bilinear read of the value surface at an off-node point."""
    grid = surface.grid
    tt, xx = grid.t_nodes(), grid.x_nodes()
    j = min(int(np.searchsorted(tt, t, side="right")) - 1, grid.nt - 1)
    i = min(int(np.searchsorted(xx, x, side="right")) - 1, grid.nx - 1)
    ft = (t - tt[j]) / grid.dt
    fx = (x - xx[i]) / grid.dx
    v = surface.v
    return ((1 - ft) * (1 - fx) * v[j, i] + (1 - ft) * fx * v[j, i + 1]
            + ft * (1 - fx) * v[j + 1, i] + ft * fx * v[j + 1, i + 1])
