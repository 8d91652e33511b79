"""Model data for the stopper vs. singular-controller game.

A game instance is a diffusion

    dX_s = mu(X_s) ds + sigma(X_s) dW_s + dnu_s

on either the whole line or the open half-line (0, inf), a stopper who
collects g(t) at a stopping time of their choice, a running payoff h(t, x)
accrued until then, and a controller who may push the state with a
bounded-variation control nu at marginal cost alpha0 per unit of variation.
The stopper maximises and the controller minimises the discounted total.

Two derived quantities drive most of the analysis and all of the numerics:

    theta(t, x)   = g'(t) - r*g(t) + h(t, x)      net flow from waiting
    lambda_rate(y) = r - mu'(y)                   discount of the gradient problem

The catalog ships two concrete families (a whole-line mean-reverting model
with a quadratic running payoff, and a half-line model with proportional
noise), both expressed through config-friendly scalar parameters.
`validate_assumptions` screens any instance against the standing structural
conditions before the PDE solvers will touch it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

WHOLE_LINE = "R"
HALF_LINE = "halfline"

# fixed seed for the flag-only Monte Carlo screen; keeps reports reproducible
_SCREEN_SEED = 0x5EED_CAFE


class ModelError(ValueError):
    """Rejected model data (bad parameter, wrong domain, ...)."""


@dataclass(frozen=True)
class GameModel:
    """Coefficients and payoff data of one game instance.

    All callables accept floats or numpy arrays. ``sigma_param`` is the
    constant volatility on the whole line and the proportional volatility
    coefficient on the half-line; it may be zero only for simulation-side
    degenerate tests, the assumption screen rejects it before any solve.
    """

    domain_kind: str
    mu: Callable
    mu_x: Callable
    mu_xx: Callable
    sigma_param: float
    g: Callable
    g_dot: Callable
    h: Callable
    h_x: Callable
    h_xx: Callable
    r: float
    alpha0: float
    T: float
    x_ref: float
    growth_p: float = 2.0
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.domain_kind not in (WHOLE_LINE, HALF_LINE):
            raise ModelError(f"domain_kind must be '{WHOLE_LINE}' or '{HALF_LINE}', got {self.domain_kind!r}")
        if not self.alpha0 > 0:
            raise ModelError(f"alpha0 must be positive, got {self.alpha0}")
        if not self.T > 0:
            raise ModelError(f"T must be positive, got {self.T}")
        if self.sigma_param < 0:
            raise ModelError(f"sigma_param must be nonnegative, got {self.sigma_param}")
        if self.r < 0:
            raise ModelError(f"r must be nonnegative, got {self.r}")
        if self.domain_kind == HALF_LINE and abs(float(self.mu(0.0))) > 1e-12:
            raise ModelError("half-line models require mu(0) = 0")

    # -- volatility helpers ------------------------------------------------

    def sigma(self, x):
        if self.domain_kind == WHOLE_LINE:
            return np.full_like(np.asarray(x, dtype=float), self.sigma_param)
        return self.sigma_param * np.asarray(x, dtype=float)

    def sigma_x(self, x):
        x = np.asarray(x, dtype=float)
        if self.domain_kind == WHOLE_LINE:
            return np.zeros_like(x)
        return np.full_like(x, self.sigma_param)

    def sigma2(self, x):
        s = self.sigma(x)
        return s * s

    def y_drift(self, x):
        """Drift of the gradient problem's diffusion: mu + sigma*sigma_x."""
        return np.asarray(self.mu(x), dtype=float) + self.sigma(x) * self.sigma_x(x)

    def in_closure(self, x) -> bool:
        if self.domain_kind == WHOLE_LINE:
            return bool(np.all(np.isfinite(x)))
        return bool(np.all(np.asarray(x) >= 0.0)) and bool(np.all(np.isfinite(x)))

    def in_open_domain(self, x) -> bool:
        if self.domain_kind == WHOLE_LINE:
            return bool(np.all(np.isfinite(x)))
        return bool(np.all(np.asarray(x) > 0.0)) and bool(np.all(np.isfinite(x)))


def theta(model: GameModel, t, x):
    """Net flow from waiting: g'(t) - r*g(t) + h(t, x).

    Negative values mark states where delay is locally costly to the
    stopper; the sign structure of this quantity anchors both free
    boundaries. Accepts scalars or arrays; inputs must lie in [0, T] and
    the closure of the state domain.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > model.T):
        raise ModelError(f"t must lie in [0, {model.T}], got {t}")
    if not model.in_closure(np.asarray(x, dtype=float)):
        raise ModelError(f"x outside the closed state domain: {x}")
    val = np.asarray(model.g_dot(t), dtype=float) - model.r * np.asarray(model.g(t), dtype=float) \
        + np.asarray(model.h(t, x), dtype=float)
    return float(val) if val.ndim == 0 else val


def lambda_rate(model: GameModel, y):
    """State-dependent discount rate of the gradient problem: r - mu'(y)."""
    y_arr = np.asarray(y, dtype=float)
    if not model.in_open_domain(y_arr):
        raise ModelError(f"y outside the open state domain: {y}")
    val = model.r - np.asarray(model.mu_x(y_arr), dtype=float)
    return float(val) if val.ndim == 0 else val


def theta_root(model: GameModel, t: float, x_lo: float, x_hi: float):
    """Lowest zero of x -> theta(t, x) on [x_lo, x_hi], or None.

    Returns x_lo when theta is positive on the whole window and None when
    it never becomes positive. Assumes theta is nondecreasing in x over the
    bracket, which holds for every catalog family (h_x >= 0).
    """
    f_lo = theta(model, t, x_lo)
    f_hi = theta(model, t, x_hi)
    if f_lo > 0.0:
        return x_lo
    if f_hi <= 0.0:
        return None
    return float(brentq(lambda x: theta(model, t, x), x_lo, x_hi, xtol=1e-13))


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

_OU_DEFAULTS = {
    "kappa": 1.0,       # mean reversion speed
    "theta": 0.5,       # mean reversion level
    "sigma0": 0.4,      # constant volatility
    "drift0": 0.0,      # additive drift offset (zero for the plain model)
    "r": 0.1,
    "alpha0": 0.5,
    "T": 1.0,
    "g0": 1.0,          # constant stopping payoff
    "c": 1.0,           # quadratic running-payoff coefficient
    "beta": 0.1,        # exponential time decay of the running payoff
    "h_const": 0.0,     # additive running-payoff constant
    "h_slope": 0.0,     # additive linear running-payoff term
    "x_ref": 0.45,      # reference evaluation state
}

_HALFLINE_DEFAULTS = {
    "kappa": 0.05,      # proportional drift rate
    "m": math.inf,      # drift saturation level; inf means linear drift
    "sigma1": 0.3,      # proportional volatility
    "r": 0.1,
    "alpha0": 0.5,
    "T": 1.0,
    "g0": 1.0,
    "c": 1.0,
    "beta": 0.1,
    "h_const": 0.0,
    "h_slope": 0.0,
    "x_ref": 1.0,
}

CATALOG_DOMAINS = {"ou-quadratic": WHOLE_LINE, "halfline-linear": HALF_LINE}


def catalog_param_names(name: str) -> tuple:
    """Parameter names accepted as overrides by a catalog model."""
    if name not in CATALOG_DOMAINS:
        raise ModelError(f"unknown catalog model {name!r}; known: {sorted(CATALOG_DOMAINS)}")
    defaults = _OU_DEFAULTS if name == "ou-quadratic" else _HALFLINE_DEFAULTS
    return tuple(sorted(defaults))


def catalog(name: str, params: dict | None = None) -> GameModel:
    """Build a catalog model, applying parameter overrides from ``params``."""
    if name not in CATALOG_DOMAINS:
        raise ModelError(f"unknown catalog model {name!r}; known: {sorted(CATALOG_DOMAINS)}")
    overrides = dict(params or {})
    if name == "ou-quadratic":
        defaults = dict(_OU_DEFAULTS)
    else:
        defaults = dict(_HALFLINE_DEFAULTS)
    unknown = sorted(set(overrides) - set(defaults))
    if unknown:
        raise ModelError(f"unknown parameter(s) for {name!r}: {unknown}")
    p = {**defaults, **overrides}

    c, beta, g0 = float(p["c"]), float(p["beta"]), float(p["g0"])
    h_const, h_slope = float(p["h_const"]), float(p["h_slope"])

    def g(t):
        t = np.asarray(t, dtype=float)
        return np.full_like(t, g0) if t.ndim else g0

    def g_dot(t):
        t = np.asarray(t, dtype=float)
        return np.zeros_like(t) if t.ndim else 0.0

    def h(t, x):
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        return h_const + h_slope * x + c * xp * xp * np.exp(-beta * np.asarray(t, dtype=float))

    def h_x(t, x):
        x = np.asarray(x, dtype=float)
        return h_slope + 2.0 * c * np.maximum(x, 0.0) * np.exp(-beta * np.asarray(t, dtype=float))

    def h_xx(t, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * c * (x > 0.0) * np.exp(-beta * np.asarray(t, dtype=float))

    if name == "ou-quadratic":
        kappa, lvl, drift0 = float(p["kappa"]), float(p["theta"]), float(p["drift0"])

        def mu(x):
            return drift0 + kappa * (lvl - np.asarray(x, dtype=float))

        def mu_x(x):
            return np.full_like(np.asarray(x, dtype=float), -kappa)

        def mu_xx(x):
            return np.zeros_like(np.asarray(x, dtype=float))

        return GameModel(
            domain_kind=WHOLE_LINE, mu=mu, mu_x=mu_x, mu_xx=mu_xx,
            sigma_param=float(p["sigma0"]), g=g, g_dot=g_dot, h=h, h_x=h_x, h_xx=h_xx,
            r=float(p["r"]), alpha0=float(p["alpha0"]), T=float(p["T"]),
            x_ref=float(p["x_ref"]), name=name, params=p,
        )

    kappa, m = float(p["kappa"]), float(p["m"])

    def mu(x):
        x = np.asarray(x, dtype=float)
        if math.isinf(m):
            return kappa * x
        return kappa * x * (1.0 - x / m)

    def mu_x(x):
        x = np.asarray(x, dtype=float)
        if math.isinf(m):
            return np.full_like(x, kappa)
        return kappa * (1.0 - 2.0 * x / m)

    def mu_xx(x):
        x = np.asarray(x, dtype=float)
        if math.isinf(m):
            return np.zeros_like(x)
        return np.full_like(x, -2.0 * kappa / m)

    return GameModel(
        domain_kind=HALF_LINE, mu=mu, mu_x=mu_x, mu_xx=mu_xx,
        sigma_param=float(p["sigma1"]), g=g, g_dot=g_dot, h=h, h_x=h_x, h_xx=h_xx,
        r=float(p["r"]), alpha0=float(p["alpha0"]), T=float(p["T"]),
        x_ref=float(p["x_ref"]), name=name, params=p,
    )


def default_window(model: GameModel) -> tuple[float, float]:
    """Default truncation window for a model.

    Whole line: six stationary standard deviations either side of the
    reversion level (falling back to a diffusive scale when kappa <= 0).
    Half-line: [0, 8 * x_ref].
    """
    if model.domain_kind == HALF_LINE:
        return 0.0, 8.0 * model.x_ref
    p = model.params
    kappa = float(p.get("kappa", 1.0))
    lvl = float(p.get("theta", model.x_ref))
    if kappa > 0 and model.sigma_param > 0:
        spread = 6.0 * model.sigma_param / math.sqrt(2.0 * kappa)
    else:
        spread = 6.0 * max(model.sigma_param, 0.1) * math.sqrt(model.T) + 1.0
    return lvl - spread, lvl + spread


# ---------------------------------------------------------------------------
# assumption screening
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    samples: str
    passed: bool
    worst: float
    location: tuple | None = None
    flag_only: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "samples": self.samples,
            "passed": bool(self.passed),
            "worst": float(self.worst),
            "location": list(self.location) if self.location is not None else None,
            "flag_only": bool(self.flag_only),
        }


@dataclass(frozen=True)
class AssumptionReport:
    model_name: str
    checks: tuple

    @property
    def hard_pass(self) -> bool:
        return all(c.passed for c in self.checks if not c.flag_only)

    def failures(self):
        return [c for c in self.checks if not c.passed and not c.flag_only]

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "hard_pass": self.hard_pass,
            "checks": [c.to_dict() for c in self.checks],
        }


def _argmax_location(arr, tt, xx):
    j, i = np.unravel_index(int(np.argmax(arr)), arr.shape)
    return (float(tt[j]), float(xx[i]))


def validate_assumptions(model: GameModel, grid) -> AssumptionReport:
    """Screen a model against the structural assumptions on a grid's window.

    Every check is evaluated on the grid nodes. All checks are hard except
    the final Monte Carlo screen of the controller's far-field advantage,
    which uses absorption at the lowest zero of theta (a conservative
    stand-in for the stopping boundary, computable before any solve) and is
    reported flag-only.
    """
    tol = 1e-9
    xx = grid.x_nodes()
    tt = grid.t_nodes()
    checks = []

    hx = np.empty((tt.size, xx.size))
    th = np.empty((tt.size, xx.size))
    for j, t in enumerate(tt):
        hx[j] = np.asarray(model.h_x(t, xx), dtype=float)
        th[j] = np.asarray(model.g_dot(t), dtype=float) - model.r * float(model.g(t)) \
            + np.asarray(model.h(t, xx), dtype=float)

    desc = f"all {tt.size}x{xx.size} grid nodes"

    viol = np.maximum(0.0, -hx)
    checks.append(AssumptionCheck(
        "h_x-nonnegative", desc, bool(viol.max() <= tol), float(viol.max()),
        _argmax_location(viol, tt, xx)))

    dec_x = np.maximum(0.0, hx[:, :-1] - hx[:, 1:])
    checks.append(AssumptionCheck(
        "h_x-nondecreasing-in-x", desc, bool(dec_x.max() <= tol), float(dec_x.max()),
        _argmax_location(dec_x, tt, xx[:-1])))

    inc_t = np.maximum(0.0, hx[1:] - hx[:-1])
    checks.append(AssumptionCheck(
        "h_x-nonincreasing-in-t", desc, bool(inc_t.max() <= tol), float(inc_t.max()),
        _argmax_location(inc_t, tt[1:], xx)))

    th_inc = np.maximum(0.0, th[1:] - th[:-1])
    checks.append(AssumptionCheck(
        "theta-nonincreasing-in-t", desc, bool(th_inc.max() <= tol), float(th_inc.max()),
        _argmax_location(th_inc, tt[1:], xx)))

    th_min = float(th.min())
    checks.append(AssumptionCheck(
        "theta-bounded-below", desc, bool(np.isfinite(th_min)), -th_min, None))

    # sup_x theta(t, .) must not be negative for t < T; a zero sup is the
    # degenerate boundary case (constant payoffs) and is admitted
    sup_per_level = th[:-1].max(axis=1)
    worst_sup = float(sup_per_level.min())
    j_worst = int(np.argmin(sup_per_level))
    checks.append(AssumptionCheck(
        "theta-positive-somewhere", f"levels t < T, sup over {xx.size} nodes",
        bool(worst_sup >= -1e-12), worst_sup, (float(tt[j_worst]), float("nan"))))

    if model.domain_kind == HALF_LINE:
        th00 = theta(model, 0.0, 0.0)
        checks.append(AssumptionCheck(
            "theta-negative-at-origin", "single point (0, 0)",
            bool(th00 < 0.0), float(th00), (0.0, 0.0)))

    mu_vals = np.asarray(model.mu(xx), dtype=float)
    d2mu = mu_vals[2:] - 2.0 * mu_vals[1:-1] + mu_vals[:-2]
    scale = grid.dx * grid.dx * max(1.0, float(np.abs(mu_vals).max()))
    conv_viol = float(np.maximum(0.0, -d2mu).max()) if d2mu.size else 0.0
    checks.append(AssumptionCheck(
        "mu-convex", f"second differences at {max(xx.size - 2, 0)} interior nodes",
        bool(conv_viol <= 1e-9 * scale + 1e-14), conv_viol, None))

    mux_max = float(np.asarray(model.mu_x(xx), dtype=float).max())
    checks.append(AssumptionCheck(
        "mu-x-bounded-above", desc, bool(np.isfinite(mux_max)), mux_max, None))

    checks.append(AssumptionCheck(
        "sigma-positive", "model parameter", bool(model.sigma_param > 0.0),
        float(model.sigma_param), None))

    checks.append(_far_field_flag_check(model, grid, th))

    return AssumptionReport(model_name=model.name, checks=tuple(checks))


def _far_field_flag_check(model: GameModel, grid, th) -> AssumptionCheck:
    """Flag-only Monte Carlo screen: the controller must beat immediate
    stopping far out, i.e. the discounted h_x flow from the top of the
    window, absorbed at the lowest zero of theta, should exceed alpha0."""
    n_paths, n_steps = 1000, 128
    t0, y0 = 0.0, grid.x_hi
    dt = model.T / n_steps
    tgrid = dt * np.arange(n_steps + 1)

    roots = np.empty(n_steps + 1)
    for k, t in enumerate(tgrid):
        rt = theta_root(model, min(t, model.T), grid.x_lo, grid.x_hi)
        if rt is None:
            # theta never positive at this level: no conservative absorption
            roots[k] = -np.inf
        else:
            roots[k] = rt

    rng = np.random.Generator(np.random.Philox(key=np.array([_SCREEN_SEED, 0], dtype=np.uint64)))
    dw = rng.standard_normal((n_paths, n_steps)) * math.sqrt(dt)

    y = np.full(n_paths, y0)
    alive = np.ones(n_paths, dtype=bool)
    disc = np.ones(n_paths)
    acc = np.zeros(n_paths)
    for k in range(n_steps):
        lam = model.r - np.asarray(model.mu_x(y), dtype=float)
        hx = np.asarray(model.h_x(tgrid[k], y), dtype=float)
        acc += alive * disc * hx * dt
        disc = disc * np.exp(-lam * dt)
        y = y + np.asarray(model.y_drift(y), dtype=float) * dt + model.sigma(y) * dw[:, k]
        if model.domain_kind == HALF_LINE:
            y = np.maximum(y, 0.0)
        alive &= y > roots[k + 1]
    est = float(acc.mean())
    return AssumptionCheck(
        "controller-advantage-at-far-field",
        f"Monte Carlo, {n_paths} paths from (0, {y0:g}), absorption at the lowest theta zero",
        bool(est > model.alpha0), est, (t0, y0), flag_only=True)
