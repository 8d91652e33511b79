"""Independent solver for the gradient of the value function.

The spatial derivative of the game value admits its own characterisation:
it is the value of an optimal stopping problem for the drift-corrected
diffusion (drift mu + sigma*sigma_x), discounted at the state-dependent
rate lambda(y) = r - mu'(y), with running payoff h_x, stopping payoff
alpha0, absorption (value 0) at the stopping boundary a(t) of the game and
zero terminal value:

    min{ u_t + G u - lambda u + h_x,  alpha0 - u } = 0   above a(t),
    u = 0 on and at a(t),   u(T, .) = 0.

Solving it independently of the value surface and comparing u with the
forward difference of v is the strongest internal consistency check the
package has; it also provides ground truth for the controller's optimal
stopping rule.

The absorption curve is taken from extracted boundaries and is generally
off-grid: the first active node above it uses a shortened left stencil
down to the interpolated curve (value 0 there), which keeps the Dirichlet
datum first-order accurate. Negative discount rates are admitted up to
|lambda| * dt <= 0.5; beyond that the scheme's monotonicity is not
guaranteed and the solve faults instead of proceeding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundaries import FreeBoundaries
from .faults import SolverFault
from .grid import LatticeGrid
from .kernels import gradient_level
from .model import GameModel
from .vi_solver import MAX_ITERS, TOL_SOLVE, grad_tol

# absorption points closer to a node than this fraction of dx snap onto it
_SNAP_FRACTION = 1e-3

LAMBDA_DT_CAP = 0.5


@dataclass
class OsSurface:
    """Solved stopping-problem surface for the value gradient.

    u has shape (nt+1, nx+1); stop_region marks nodes where stopping is
    optimal (u within tol_stop of alpha0); b_os is the per-level lowest
    interpolated crossing of u = alpha0 - tol_stop (NaN where u never
    reaches it); absorb_index/absorb_dist record the per-level absorbed
    prefix and the distance from the first active node down to the
    interpolated absorption point.
    """

    model: GameModel
    grid: LatticeGrid
    u: np.ndarray
    stop_region: np.ndarray
    b_os: np.ndarray
    b_os_defined: np.ndarray
    absorb_index: np.ndarray
    absorb_dist: np.ndarray
    tol_stop: float
    iters: np.ndarray
    deltas: np.ndarray


def _absorption_row(fb: FreeBoundaries, j: int, grid: LatticeGrid) -> tuple[int, float]:
    """Absorbed prefix for level j: (last absorbed index, distance from the
    first active node to the interpolated boundary)."""
    nx = grid.nx
    if fb.all_stop[j]:
        return nx, grid.dx
    if not fb.a_defined[j]:
        # empty stopping region on the window: absorb at the low edge only
        return 0, grid.dx
    aj = min(max(float(fb.a[j]), grid.x_lo), grid.x_hi)
    if aj >= grid.x_hi - _SNAP_FRACTION * grid.dx:
        return nx, grid.dx
    x = grid.x_nodes()
    k = int(np.searchsorted(x, aj, side="right") - 1)
    k = min(max(k, 0), nx - 1)
    d = x[k + 1] - aj
    if d < _SNAP_FRACTION * grid.dx:
        k += 1
        if k >= nx:
            return nx, grid.dx
        d = grid.dx
    return k, float(min(d, grid.dx))


def solve_vx_os(model: GameModel, grid: LatticeGrid, fb: FreeBoundaries, *,
                tol_solve: float = TOL_SOLVE, max_iters: int = MAX_ITERS,
                tol_stop: float | None = None) -> OsSurface:
    """Solve the gradient stopping problem backward along fb's absorption
    curve. Raises SolverFault on non-convergence or when the discount-rate
    step cap |lambda|*dt <= 0.5 is violated."""
    if fb.t.size != grid.nt + 1 or fb.x_lo != grid.x_lo or fb.x_hi != grid.x_hi:
        raise ValueError("boundaries were extracted on a different grid")
    if tol_stop is None:
        tol_stop = grad_tol(model)

    x = grid.x_nodes()
    lam_row = np.ascontiguousarray(model.r - np.asarray(model.mu_x(x), dtype=float))
    lam_worst = float(np.abs(lam_row).max())
    if lam_worst * grid.dt > LAMBDA_DT_CAP:
        raise SolverFault(
            f"discount-rate step cap exceeded: max |lambda| * dt = "
            f"{lam_worst * grid.dt:.3g} > {LAMBDA_DT_CAP}; refine nt",
            level=None, delta=None)

    mud_row = np.ascontiguousarray(np.asarray(model.y_drift(x), dtype=float))
    sig2_row = np.ascontiguousarray(np.asarray(model.sigma2(x), dtype=float))
    ts = grid.t_nodes()

    nt, nx = grid.nt, grid.nx
    u = np.zeros((nt + 1, nx + 1))
    iters = np.zeros(nt, dtype=np.int64)
    deltas = np.zeros(nt)
    absorb_index = np.full(nt + 1, nx, dtype=np.int64)
    absorb_dist = np.full(nt + 1, grid.dx)
    scratch = np.empty(nx + 1)
    level_tol = tol_solve * grid.dt

    for j in range(nt - 1, -1, -1):
        k_abs, d_abs = _absorption_row(fb, j, grid)
        absorb_index[j] = k_abs
        absorb_dist[j] = d_abs
        hx_row = np.ascontiguousarray(np.asarray(model.h_x(ts[j], x), dtype=float))
        work = u[j + 1].copy()
        it, delta = gradient_level(
            work, u[j + 1], hx_row, mud_row, sig2_row, lam_row,
            grid.dt, grid.dx, model.alpha0, k_abs, d_abs,
            level_tol, max_iters, scratch)
        if it < 0:
            raise SolverFault(
                f"gradient level {j} (t={ts[j]:.6g}) did not converge within "
                f"{max_iters} iterations; last update {delta:.3e}",
                level=j, delta=delta)
        u[j] = work
        iters[j] = it
        deltas[j] = delta

    stop_region = u >= (model.alpha0 - tol_stop)
    surface = OsSurface(
        model=model, grid=grid, u=u, stop_region=stop_region,
        b_os=np.full(nt + 1, np.nan), b_os_defined=np.zeros(nt + 1, dtype=bool),
        absorb_index=absorb_index, absorb_dist=absorb_dist,
        tol_stop=tol_stop, iters=iters, deltas=deltas)
    b, b_def = extract_b_os(surface)
    surface.b_os = b
    surface.b_os_defined = b_def
    return surface


def extract_b_os(os_surface: OsSurface) -> tuple[np.ndarray, np.ndarray]:
    """Per-level lowest interpolated crossing of u = alpha0 - tol_stop.

    Returns (values, defined): NaN/False where u stays below the threshold
    (no finite boundary), x_lo/True where the whole level is above it.
    """
    grid = os_surface.grid
    x = grid.x_nodes()
    threshold = os_surface.model.alpha0 - os_surface.tol_stop
    nt1 = grid.nt + 1
    b = np.full(nt1, np.nan)
    defined = np.zeros(nt1, dtype=bool)
    for j in range(nt1):
        row = os_surface.u[j]
        above = row >= threshold
        if not above.any():
            continue
        i = int(np.argmax(above))
        if i == 0:
            b[j] = x[0]
        else:
            w0 = threshold - row[i - 1]
            w1 = row[i] - row[i - 1]
            frac = w0 / w1 if w1 > 0 else 1.0
            b[j] = x[i - 1] + grid.dx * float(min(max(frac, 0.0), 1.0))
        defined[j] = True
    return b, defined
