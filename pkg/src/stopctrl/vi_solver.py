"""Backward solver for the min-max variational inequality of the game.

The value surface solves, level by level from the terminal payoff,

    max{ min{ v_t + L v - r v + h,  alpha0 - v_x },  g - v } = 0

with L the generator of the uncontrolled diffusion, discretised with
central second differences, upwinded first differences and an implicit
time step. Each level is relaxed to a complementarity fixed point by
projected Gauss-Seidel: PDE relaxation, then the lower projection onto the
obstacle g, then a left-to-right sweep capping the forward difference at
alpha0. The per-level stopping threshold is tol_solve * dt so that the
errors accumulated across all nt levels stay below tol_solve times a
window-dependent constant.

Region labels split the grid into contact nodes S (v = g up to
tol_contact), capped nodes M (forward difference at alpha0 up to tol_grad)
and the interior/inaction complement CI where the PDE row itself holds.

`solve_vi_penalty` solves a penalised equation with the same stencils and
no projections; it shares no fixed-point logic with `solve_vi` and exists
only as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .faults import AssumptionError, SolverFault
from .grid import LatticeGrid
from .kernels import penalty_level, value_level
from .model import HALF_LINE, GameModel, validate_assumptions

REGION_STOP = 0
REGION_INTERIOR = 1
REGION_ACTION = 2
REGION_LABELS = ("S", "CI", "M")

TOL_SOLVE = 1e-10
MAX_ITERS = 10000
TOL_CONTACT = 1e-8
TOL_CONVEX = 1e-6


def grad_tol(model: GameModel) -> float:
    return 1e-6 * model.alpha0


@dataclass
class ValueSurface:
    """Solved value surface with derived fields.

    v has shape (nt+1, nx+1), row j holding the level t_j. vx is the
    central difference (one-sided at the window edges), dplus the forward
    difference used by the gradient constraint (last column replicated),
    vt the difference toward the later level (one-sided at the terminal
    row), vxx the central second difference (one-sided at the edges).
    region holds the S/CI/M codes, residual the per-region defect: v - g
    on S, dplus - alpha0 on M, the discrete PDE row on CI. pde_row keeps
    that PDE row at every node for the ex-post complementarity checks.
    """

    model: GameModel
    grid: LatticeGrid
    v: np.ndarray
    vx: np.ndarray
    vt: np.ndarray
    vxx: np.ndarray
    dplus: np.ndarray
    region: np.ndarray
    residual: np.ndarray
    pde_row: np.ndarray
    g_vals: np.ndarray
    h_vals: np.ndarray
    tol_contact: float
    tol_grad: float
    tol_solve: float
    iters: np.ndarray
    deltas: np.ndarray
    scheme: str = "projected-gs"
    penalty_eps: float | None = None
    assumptions: object | None = None
    extras: dict = field(default_factory=dict)


def _upwind_pde_row(model, grid, v, g_vals, h_vals):
    """Discrete PDE row at every node, matching the scheme's stencils.

    Interior: time difference toward the later level, central diffusion,
    upwinded drift. Edges: no diffusion, one-sided drift into the domain,
    taken from the later level where the drift points outward. Terminal
    row: one-sided time difference (the row there is informational only,
    the terminal condition owns that level).
    """
    dx, dt = grid.dx, grid.dt
    x = grid.x_nodes()
    mu = np.asarray(model.mu(x), dtype=float)
    sig2 = np.asarray(model.sigma2(x), dtype=float)
    nt1, nx1 = v.shape

    vt = np.empty_like(v)
    vt[:-1] = (v[1:] - v[:-1]) / dt
    vt[-1] = vt[-2] if nt1 > 1 else 0.0

    P = np.empty_like(v)
    dp = (v[:, 1:] - v[:, :-1]) / dx
    dm = dp
    interior = slice(1, nx1 - 1)
    diff = 0.5 * sig2[interior] * (v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]) / (dx * dx)
    drift = np.where(mu[interior] >= 0.0, mu[interior] * dp[:, 1:], mu[interior] * dm[:, :-1])
    P[:, interior] = vt[:, interior] + diff + drift - model.r * v[:, interior] + h_vals[:, interior]

    m0, mN = mu[0], mu[-1]
    if m0 >= 0.0:
        drift0 = m0 * dp[:, 0]
    else:
        drift0 = np.empty(nt1)
        drift0[:-1] = m0 * dp[1:, 0]
        drift0[-1] = m0 * dp[-1, 0]
    P[:, 0] = vt[:, 0] + drift0 - model.r * v[:, 0] + h_vals[:, 0]
    if mN <= 0.0:
        driftN = mN * dp[:, -1]
    else:
        driftN = np.empty(nt1)
        driftN[:-1] = mN * dp[1:, -1]
        driftN[-1] = mN * dp[-1, -1]
    P[:, -1] = vt[:, -1] + driftN - model.r * v[:, -1] + h_vals[:, -1]
    return P


def _derive_fields(model, grid, v, g_vals, h_vals, tol_contact, tol_grad):
    dx, dt = grid.dx, grid.dt
    nt1, nx1 = v.shape

    dplus = np.empty_like(v)
    dplus[:, :-1] = (v[:, 1:] - v[:, :-1]) / dx
    dplus[:, -1] = dplus[:, -2]

    vx = np.empty_like(v)
    vx[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2.0 * dx)
    vx[:, 0] = (v[:, 1] - v[:, 0]) / dx
    vx[:, -1] = (v[:, -1] - v[:, -2]) / dx

    vt = np.empty_like(v)
    vt[:-1] = (v[1:] - v[:-1]) / dt
    vt[-1] = (v[-1] - v[-2]) / dt

    vxx = np.empty_like(v)
    vxx[:, 1:-1] = (v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]) / (dx * dx)
    vxx[:, 0] = (v[:, 0] - 2.0 * v[:, 1] + v[:, 2]) / (dx * dx)
    vxx[:, -1] = (v[:, -1] - 2.0 * v[:, -2] + v[:, -3]) / (dx * dx)

    contact = (v - g_vals[:, None]) <= tol_contact
    capped = (model.alpha0 - dplus) <= tol_grad
    region = np.full(v.shape, REGION_INTERIOR, dtype=np.int8)
    region[capped] = REGION_ACTION
    region[contact] = REGION_STOP

    pde_row = _upwind_pde_row(model, grid, v, g_vals, h_vals)
    residual = np.where(
        region == REGION_STOP, v - g_vals[:, None],
        np.where(region == REGION_ACTION, dplus - model.alpha0, pde_row))
    return vx, vt, vxx, dplus, region, residual, pde_row


def _payoff_tables(model, grid):
    x = grid.x_nodes()
    ts = grid.t_nodes()
    g_vals = np.array([float(model.g(t)) for t in ts])
    h_vals = np.empty((ts.size, x.size))
    for j, t in enumerate(ts):
        h_vals[j] = np.asarray(model.h(t, x), dtype=float)
    return g_vals, h_vals


def solve_vi(model: GameModel, grid: LatticeGrid, *,
             tol_solve: float = TOL_SOLVE, max_iters: int = MAX_ITERS,
             tol_contact: float = TOL_CONTACT, tol_grad: float | None = None,
             check_assumptions: bool = True) -> ValueSurface:
    """Solve the variational inequality backward on the grid.

    Raises AssumptionError when the structural screen hard-fails and
    SolverFault when some level fails to converge within max_iters.
    """
    if tol_grad is None:
        tol_grad = grad_tol(model)
    report = None
    if check_assumptions:
        report = validate_assumptions(model, grid)
        if not report.hard_pass:
            raise AssumptionError(report)

    x = grid.x_nodes()
    mu_row = np.ascontiguousarray(np.asarray(model.mu(x), dtype=float))
    sig2_row = np.ascontiguousarray(np.asarray(model.sigma2(x), dtype=float))
    g_vals, h_vals = _payoff_tables(model, grid)

    nt, nx = grid.nt, grid.nx
    v = np.empty((nt + 1, nx + 1))
    v[-1] = g_vals[-1]
    iters = np.zeros(nt, dtype=np.int64)
    deltas = np.zeros(nt)
    scratch = np.empty(nx + 1)
    lo_dirichlet = model.domain_kind == HALF_LINE
    level_tol = tol_solve * grid.dt

    for j in range(nt - 1, -1, -1):
        work = v[j + 1].copy()
        it, delta = value_level(
            work, v[j + 1], g_vals[j], np.ascontiguousarray(h_vals[j]),
            mu_row, sig2_row, grid.dt, grid.dx, model.r, model.alpha0,
            lo_dirichlet, level_tol, max_iters, scratch)
        if it < 0:
            raise SolverFault(
                f"level {j} (t={grid.t_nodes()[j]:.6g}) did not converge within "
                f"{max_iters} iterations; last update {delta:.3e}",
                level=j, delta=delta)
        v[j] = work
        iters[j] = it
        deltas[j] = delta

    vx, vt, vxx, dplus, region, residual, pde_row = _derive_fields(
        model, grid, v, g_vals, h_vals, tol_contact, tol_grad)
    return ValueSurface(
        model=model, grid=grid, v=v, vx=vx, vt=vt, vxx=vxx, dplus=dplus,
        region=region, residual=residual, pde_row=pde_row, g_vals=g_vals,
        h_vals=h_vals, tol_contact=tol_contact, tol_grad=tol_grad,
        tol_solve=tol_solve, iters=iters, deltas=deltas,
        scheme="projected-gs", assumptions=report)


def solve_vi_penalty(model: GameModel, grid: LatticeGrid, eps: float, *,
                     tol_solve: float = TOL_SOLVE, max_iters: int = MAX_ITERS,
                     tol_contact: float = TOL_CONTACT, tol_grad: float | None = None) -> ValueSurface:
    """Penalised cross-check solver: obstacle and gradient constraints are
    softened into penalty terms of weight 1/eps; no projections anywhere."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if tol_grad is None:
        tol_grad = grad_tol(model)

    x = grid.x_nodes()
    mu_row = np.ascontiguousarray(np.asarray(model.mu(x), dtype=float))
    sig2_row = np.ascontiguousarray(np.asarray(model.sigma2(x), dtype=float))
    g_vals, h_vals = _payoff_tables(model, grid)

    nt, nx = grid.nt, grid.nx
    v = np.empty((nt + 1, nx + 1))
    v[-1] = g_vals[-1]
    iters = np.zeros(nt, dtype=np.int64)
    deltas = np.zeros(nt)
    scratch = np.empty(nx + 1)
    lo_dirichlet = model.domain_kind == HALF_LINE
    level_tol = tol_solve * grid.dt

    for j in range(nt - 1, -1, -1):
        work = v[j + 1].copy()
        it, delta = penalty_level(
            work, v[j + 1], g_vals[j], np.ascontiguousarray(h_vals[j]),
            mu_row, sig2_row, grid.dt, grid.dx, model.r, model.alpha0,
            eps, lo_dirichlet, level_tol, max_iters, scratch)
        if it < 0:
            raise SolverFault(
                f"penalty level {j} did not converge within {max_iters} "
                f"iterations; last update {delta:.3e}",
                level=j, delta=delta)
        v[j] = work
        iters[j] = it
        deltas[j] = delta

    vx, vt, vxx, dplus, region, residual, pde_row = _derive_fields(
        model, grid, v, g_vals, h_vals, tol_contact, tol_grad)
    return ValueSurface(
        model=model, grid=grid, v=v, vx=vx, vt=vt, vxx=vxx, dplus=dplus,
        region=region, residual=residual, pde_row=pde_row, g_vals=g_vals,
        h_vals=h_vals, tol_contact=tol_contact, tol_grad=tol_grad,
        tol_solve=tol_solve, iters=iters, deltas=deltas,
        scheme="penalty", penalty_eps=eps)


def _interior_mask(region: np.ndarray) -> np.ndarray:
    """CI nodes at least two nodes from any region change along x,
    excluding the terminal row."""
    ci = region == REGION_INTERIOR
    mask = ci.copy()
    for shift in (1, 2):
        mask[:, shift:] &= ci[:, :-shift]
        mask[:, :-shift] &= ci[:, shift:]
    mask[-1] = False
    return mask


def residual_report(surface: ValueSurface) -> dict:
    """Region-wise residual summary of a solved surface.

    Keys: interior_pde (sup |PDE row| over CI nodes >= 2 nodes from any
    region change), obstacle_violation (sup (g-v)+), gradient_violation
    (sup (D+v - alpha0)+ over true forward differences), stop_contact_gap
    (sup |v-g| over S), action_gradient_gap (sup |D+v - alpha0| over M),
    and second_form_defect: the alternative complementarity form
    min{max{PDE row, g-v}, alpha0 - D+v} evaluated ex post at all
    non-terminal nodes (it is implied, not imposed; nonzero values
    concentrate at nodes where the discrete regions change).
    """
    v, g = surface.v, surface.g_vals[:, None]
    alpha0 = surface.model.alpha0
    dplus_true = surface.dplus[:, :-1]

    mask = _interior_mask(surface.region)
    interior_pde = float(np.abs(surface.pde_row[mask]).max()) if mask.any() else 0.0

    obstacle_violation = float(np.maximum(g - v, 0.0).max())
    gradient_violation = float(np.maximum(dplus_true - alpha0, 0.0).max())

    stop_mask = surface.region == REGION_STOP
    stop_contact_gap = float(np.abs((v - g))[stop_mask].max()) if stop_mask.any() else 0.0
    action_mask = surface.region == REGION_ACTION
    action_gradient_gap = float(np.abs(surface.dplus - alpha0)[action_mask].max()) if action_mask.any() else 0.0

    second = np.minimum(np.maximum(surface.pde_row, g - v), alpha0 - surface.dplus)
    second_form_defect = float(np.abs(second[:-1]).max())

    counts = {REGION_LABELS[k]: int((surface.region == k).sum()) for k in range(3)}
    return {
        "interior_pde": interior_pde,
        "obstacle_violation": obstacle_violation,
        "gradient_violation": gradient_violation,
        "stop_contact_gap": stop_contact_gap,
        "action_gradient_gap": action_gradient_gap,
        "second_form_defect": second_form_defect,
        "region_counts": counts,
    }
