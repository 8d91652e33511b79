"""Free-boundary extraction from a solved value surface.

Per time level, the stopping boundary a is the lowest interpolated
upcrossing of (v - g) - tol_contact: contact nodes must form a prefix of
the window (connected stopping region below a). The action boundary b is
the highest interpolated downcrossing of alpha0 - D+v - tol_grad, the
forward difference anchored at its left node: capped nodes must form a
suffix (connected action region above b). Non-connected slices raise
TopologyFault rather than being repaired.

Undefined values are stored as NaN with parallel defined-masks: a is
undefined both when the stopping region misses the window entirely and
when it covers it (the latter flagged per level as all_stop); b is
undefined when the gradient constraint never binds on the window
(conceptually +infinity), and sits at x_lo when it binds everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .faults import TopologyFault
from .model import theta_root
from .vi_solver import ValueSurface

EDGE_NODES = 5  # a boundary this close to a window edge sets the level's flag


@dataclass
class FreeBoundaries:
    """Per-level boundary locations with defined-masks and edge flags."""

    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    a_defined: np.ndarray
    b_defined: np.ndarray
    all_stop: np.ndarray
    edge_flag: np.ndarray
    x_lo: float
    x_hi: float
    dx: float

    def a_curve(self, times) -> np.ndarray:
        """a evaluated at arbitrary times: linear between defined levels,
        constant beyond them. With no defined level the curve is +inf when
        some level is all-stop (everything stops) and -inf otherwise
        (nothing does)."""
        times = np.asarray(times, dtype=float)
        if not self.a_defined.any():
            fill = np.inf if self.all_stop.any() else -np.inf
            return np.full(times.shape, fill)
        tq = self.t[self.a_defined]
        vq = self.a[self.a_defined]
        return np.interp(times, tq, vq)

    def b_curve(self, times) -> np.ndarray:
        """b evaluated at arbitrary times, +inf where never defined."""
        times = np.asarray(times, dtype=float)
        if not self.b_defined.any():
            return np.full(times.shape, np.inf)
        tq = self.t[self.b_defined]
        vq = self.b[self.b_defined]
        return np.interp(times, tq, vq)


def _prefix_crossing(w: np.ndarray, x: np.ndarray, dx: float, level: int):
    """Interpolated root of w at the boundary of its nonpositive prefix.

    Returns (value, defined, all_low). w <= 0 marks contact; contact nodes
    must form a (possibly empty or full) prefix.
    """
    contact = w <= 0.0
    if contact.all():
        return np.nan, False, True
    if not contact.any():
        return np.nan, False, False
    first_free = int(np.argmin(contact))  # first False
    if contact[first_free:].any():
        raise TopologyFault(
            f"stopping region is not connected at level {level}: contact nodes "
            f"recur above index {first_free}", level=level)
    if first_free == 0:
        return np.nan, False, False
    k = first_free - 1
    val = x[k] + dx * (-w[k]) / (w[k + 1] - w[k])
    return float(val), True, False


def _suffix_crossing(z: np.ndarray, x: np.ndarray, dx: float, level: int):
    """Interpolated root of z at the boundary of its nonpositive suffix.

    z <= 0 marks capped nodes; they must form a suffix. Returns
    (value, defined); a full suffix pins the boundary at the window's
    low edge.
    """
    capped = z <= 0.0
    if not capped.any():
        return np.nan, False
    if capped.all():
        return float(x[0]), True
    first_cap = int(np.argmax(capped))
    if (~capped[first_cap:]).any():
        raise TopologyFault(
            f"action region is not connected at level {level}: uncapped nodes "
            f"recur above index {first_cap}", level=level)
    if first_cap == 0:
        # capped.all() handled above, so a False must follow; unreachable
        return float(x[0]), True
    k = first_cap - 1
    val = x[k] + dx * z[k] / (z[k] - z[k + 1])
    return float(val), True


def extract_boundaries(surface: ValueSurface) -> FreeBoundaries:
    """Extract a(t) and b(t) per level; raises TopologyFault when a level's
    regions are not connected."""
    grid = surface.grid
    x = grid.x_nodes()
    ts = grid.t_nodes()
    dx = grid.dx
    alpha0 = surface.model.alpha0
    nt1 = ts.size

    a = np.full(nt1, np.nan)
    b = np.full(nt1, np.nan)
    a_def = np.zeros(nt1, dtype=bool)
    b_def = np.zeros(nt1, dtype=bool)
    all_stop = np.zeros(nt1, dtype=bool)
    edge = np.zeros(nt1, dtype=bool)

    dplus_true = surface.dplus[:, :-1]
    for j in range(nt1):
        w = surface.v[j] - surface.g_vals[j] - surface.tol_contact
        a[j], a_def[j], all_stop[j] = _prefix_crossing(w, x, dx, j)

        z = alpha0 - dplus_true[j] - surface.tol_grad
        b[j], b_def[j] = _suffix_crossing(z, x[:-1], dx, j)

        near = EDGE_NODES * dx
        if a_def[j] and (a[j] - grid.x_lo <= near or grid.x_hi - a[j] <= near):
            edge[j] = True
        if b_def[j] and (b[j] - grid.x_lo <= near or grid.x_hi - b[j] <= near):
            edge[j] = True

    return FreeBoundaries(
        t=ts, a=a, b=b, a_defined=a_def, b_defined=b_def,
        all_stop=all_stop, edge_flag=edge, x_lo=grid.x_lo, x_hi=grid.x_hi,
        dx=dx)


def check_boundary_shape(fb: FreeBoundaries, surface: ValueSurface) -> dict:
    """Shape report: monotonicity defects, the terminal gap between a and
    the lowest terminal zero of theta, edge-flag count and the minimal
    separation b - a. Entries are None where not applicable (no defined
    levels to measure)."""
    model = surface.model
    grid = surface.grid

    def monotone_defect(vals, mask):
        pair = mask[:-1] & mask[1:]
        if not pair.any():
            return None
        drops = (vals[:-1] - vals[1:])[pair]
        return float(np.maximum(drops, 0.0).max())

    a_defect = monotone_defect(fb.a, fb.a_defined)
    b_defect = monotone_defect(fb.b, fb.b_defined)

    terminal_gap = None
    j_last = grid.nt - 1
    if j_last >= 0 and fb.a_defined[j_last]:
        root = theta_root(model, model.T, grid.x_lo, grid.x_hi)
        if root is not None:
            terminal_gap = float(abs(fb.a[j_last] - root))

    both = fb.a_defined & fb.b_defined
    min_separation = float((fb.b - fb.a)[both].min()) if both.any() else None

    return {
        "applicable": bool(fb.a_defined.any() or fb.b_defined.any()),
        "a_monotonicity_defect": a_defect,
        "b_monotonicity_defect": b_defect,
        "terminal_gap": terminal_gap,
        "edge_flag_count": int(fb.edge_flag.sum()),
        "min_separation": min_separation,
        "all_stop_levels": int(fb.all_stop.sum()),
    }
