import numpy as np
import pytest

from stopctrl import check_boundary_shape, extract_boundaries
from stopctrl.boundaries import _prefix_crossing, _suffix_crossing


def test_prefix_crossing_interpolates():
    x = np.linspace(0.0, 1.0, 11)
    w = x - 0.25  # contact (w <= 0) on a prefix, root between nodes
    val, defined, all_low = _prefix_crossing(w, x, 0.1, 0)
    assert defined and not all_low
    assert val == pytest.approx(0.25, abs=1e-12)

    val, defined, all_low = _prefix_crossing(np.full_like(x, -1.0), x, 0.1, 0)
    assert not defined and all_low
    val, defined, all_low = _prefix_crossing(np.full_like(x, 1.0), x, 0.1, 0)
    assert not defined and not all_low


def test_suffix_crossing_interpolates():
    x = np.linspace(0.0, 1.0, 11)
    z = 0.75 - x  # nonpositive on a suffix
    val, defined = _suffix_crossing(z, x, 0.1, 0)
    assert defined
    assert val == pytest.approx(0.75, abs=1e-12)


def test_extracted_boundaries_shape(ou_surf_200, ou_fb_200):
    fb = ou_fb_200
    surf = ou_surf_200
    assert fb.t.size == surf.grid.nt + 1
    # the terminal row sits entirely inside the contact tolerance
    assert fb.all_stop[-1] and not fb.a_defined[-1]
    assert fb.a_defined[:-1].all()
    assert fb.b_defined.sum() > 0.7 * fb.t.size
    both = fb.a_defined & fb.b_defined
    assert np.all(fb.a[both] < fb.b[both])

    shape = check_boundary_shape(fb, surf)
    assert shape["applicable"]
    assert shape["a_monotonicity_defect"] <= 2.0 * fb.dx
    assert shape["b_monotonicity_defect"] <= 2.0 * fb.dx


def test_boundaries_bracket_the_regions(ou_surf_200, ou_fb_200):
    # every stop node sits below a, every action node above b
    surf, fb = ou_surf_200, ou_fb_200
    x = surf.grid.x_nodes()
    for j in range(surf.grid.nt):
        row = surf.region[j]
        if fb.a_defined[j]:
            stop_nodes = x[row == 0]
            if stop_nodes.size:
                assert stop_nodes.max() <= fb.a[j] + fb.dx
        if fb.b_defined[j]:
            act_nodes = x[row == 2]
            if act_nodes.size:
                assert act_nodes.min() >= fb.b[j] - fb.dx


def test_curves_interpolate_and_extend(ou_fb_200):
    fb = ou_fb_200
    t_mid = 0.5 * (fb.t[3] + fb.t[4])
    a_mid = fb.a_curve(np.array([t_mid]))[0]
    assert min(fb.a[3], fb.a[4]) <= a_mid <= max(fb.a[3], fb.a[4])
    # flat extension beyond the last defined level
    last = np.nonzero(fb.b_defined)[0][-1]
    assert fb.b_curve(np.array([fb.t[-1] + 1.0]))[0] == fb.b[last]
