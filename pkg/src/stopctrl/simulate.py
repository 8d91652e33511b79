"""Monte Carlo engine for the game's saddle-point strategies.

Paths are driven by per-path counter-based generators: path i of a bundle
always sees the stream Philox(key=(master_seed, i)), so every estimate is
a pure function of (config, master seed) regardless of block sizes or
scheduling, and different strategies evaluated on the same bundle share
noise path by path (common random numbers).

The controller's candidate optimum reflects the state along the action
boundary b: per step an Euler increment is followed by projection onto
(-inf, b], the projected amount accumulating into the non-increasing
control. The literal running-supremum solution of the reflection problem
is kept as a helper for the zero-noise case where it is exact. The
stopper's candidate optimum stops when the controlled state reaches the
stopping boundary a, where the pre-jump state counts at time zero.

Payoffs follow the game convention: discounted stopping payoff g at the
(sub-step interpolated) stopping time, left-endpoint running payoff h
until then, and marginal cost alpha0 per unit of control variation spent
on [0, tau], the time-zero jump included. Half-line paths are absorbed at
zero and keep accruing h(., 0) until stopped.

Experiment drivers (saddle deviation tests, stopping-time stability,
moment growth) stream paths in blocks of a few thousand, so memory stays
flat in the path count; the path-level functions return full path arrays
and are meant for moderate bundle sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boundaries import FreeBoundaries
from .model import HALF_LINE, GameModel

_BLOCK = 4096

DOWN = "down"
UP = "up"


@dataclass(frozen=True)
class PathBundle:
    """Deterministic noise source: path i draws from Philox(master_seed, i)."""

    master_seed: int
    n_paths: int
    n_steps: int
    dt_sim: float

    def __post_init__(self):
        if not self.dt_sim > 0.0:
            raise ValueError(f"dt_sim must be positive, got {self.dt_sim}")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError(f"master_seed must fit in 64 bits, got {self.master_seed}")

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt_sim

    def path_increments(self, path_index: int, n_steps: int | None = None) -> np.ndarray:
        """Brownian increments of one path; a prefix of the same stream
        when fewer steps are requested."""
        n = self.n_steps if n_steps is None else n_steps
        key = np.array([self.master_seed, path_index], dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        return rng.standard_normal(n) * math.sqrt(self.dt_sim)

    def block_increments(self, lo: int, hi: int, n_steps: int | None = None) -> np.ndarray:
        n = self.n_steps if n_steps is None else n_steps
        out = np.empty((hi - lo, n))
        for i in range(lo, hi):
            out[i - lo] = self.path_increments(i, n)
        return out

    def times(self, n_steps: int | None = None) -> np.ndarray:
        n = self.n_steps if n_steps is None else n_steps
        return self.dt_sim * np.arange(n + 1)


@dataclass
class SimulatedPaths:
    """Uncontrolled paths, vectorized over the path axis."""

    t0: float
    times: np.ndarray
    x: np.ndarray
    absorbed: np.ndarray
    absorb_step: np.ndarray


@dataclass
class ControlledPath:
    """Reflected paths, vectorized over the path axis.

    dnu holds the per-step control decrements with the time-zero jump in
    slot 0; nu is its running sum and total_variation the per-path |nu|.
    """

    t0: float
    x0_pre: float
    times: np.ndarray
    x: np.ndarray
    dnu: np.ndarray
    absorbed: np.ndarray
    absorb_step: np.ndarray

    @property
    def nu(self) -> np.ndarray:
        return np.cumsum(self.dnu, axis=1)

    @property
    def total_variation(self) -> np.ndarray:
        return np.sum(np.abs(self.dnu), axis=1)


def skorokhod_running_sup(free_values, barrier_values):
    """Literal running-supremum solution of the reflection problem applied
    to an already-simulated free path: nu = -sup of the positive excess,
    x = free + nu. Exact when the dynamics do not feed back into the path
    (zero noise and state-independent drift)."""
    free = np.asarray(free_values, dtype=float)
    barrier = np.asarray(barrier_values, dtype=float)
    excess = np.maximum(free - barrier, 0.0)
    nu = -np.maximum.accumulate(excess, axis=-1)
    return free + nu, nu


def _euler_block(model, drift_fn, x0, barrier, dW, dt):
    """One Euler block: optional reflection onto barrier (None = no
    control), half-line absorption at zero. Returns x (m, n+1), dnu,
    absorbed, absorb_step."""
    m, n = dW.shape
    half = model.domain_kind == HALF_LINE
    x = np.empty((m, n + 1))
    dnu = np.zeros((m, n + 1))
    absorbed = np.zeros(m, dtype=bool)
    absorb_step = np.full(m, -1, dtype=np.int64)

    cur = np.full(m, float(x0))
    if barrier is not None and np.isfinite(barrier[0]):
        start = np.minimum(cur, barrier[0])
        dnu[:, 0] = start - cur
        cur = start
    x[:, 0] = cur

    for k in range(n):
        drift = np.asarray(drift_fn(cur), dtype=float)
        sig = np.asarray(model.sigma(cur), dtype=float)
        new = cur + drift * dt + sig * dW[:, k]
        if half:
            hit = (~absorbed) & (new <= 0.0)
            absorb_step[hit] = k + 1
            absorbed |= hit
            new = np.maximum(new, 0.0)
            new[absorbed] = 0.0
        if barrier is not None:
            bk = barrier[k + 1]
            if np.isfinite(bk):
                proj = np.minimum(new, bk)
                dnu[:, k + 1] = proj - new
                new = proj
        x[:, k + 1] = new
        cur = new
    return x, dnu, absorbed, absorb_step


def _check_start(model: GameModel, t0: float, x0: float):
    if not 0.0 <= t0 <= model.T:
        raise ValueError(f"t0 must lie in [0, {model.T}], got {t0}")
    if not np.isfinite(x0):
        raise ValueError(f"x0 must be finite, got {x0}")
    if model.domain_kind == HALF_LINE and x0 < 0.0:
        raise ValueError(f"half-line start must be nonnegative, got {x0}")


def _free_paths(model, drift_fn, t0, x0, bundle, n_steps):
    _check_start(model, t0, x0)
    n = bundle.n_steps if n_steps is None else n_steps
    times = bundle.times(n)
    x = np.empty((bundle.n_paths, n + 1))
    absorbed = np.zeros(bundle.n_paths, dtype=bool)
    absorb_step = np.full(bundle.n_paths, -1, dtype=np.int64)
    for lo in range(0, bundle.n_paths, _BLOCK):
        hi = min(lo + _BLOCK, bundle.n_paths)
        dW = bundle.block_increments(lo, hi, n)
        xb, _, ab, sb = _euler_block(model, drift_fn, x0, None, dW, bundle.dt_sim)
        x[lo:hi] = xb
        absorbed[lo:hi] = ab
        absorb_step[lo:hi] = sb
    return SimulatedPaths(t0=t0, times=times, x=x, absorbed=absorbed,
                          absorb_step=absorb_step)


def simulate_uncontrolled(model: GameModel, t0: float, x0: float,
                          bundle: PathBundle, n_steps: int | None = None) -> SimulatedPaths:
    """Euler paths of the uncontrolled state from (t0, x0)."""
    return _free_paths(model, lambda xk: model.mu(xk), t0, x0, bundle, n_steps)


def simulate_Y(model: GameModel, t0: float, y0: float,
               bundle: PathBundle, n_steps: int | None = None) -> SimulatedPaths:
    """Euler paths of the drift-corrected diffusion (drift mu + sigma*sigma_x)
    that underlies the gradient stopping problem."""
    return _free_paths(model, lambda yk: model.y_drift(yk), t0, y0, bundle, n_steps)


def reflect_along_b(model: GameModel, t0: float, x0: float, fb: FreeBoundaries,
                    bundle: PathBundle, shift: float = 0.0,
                    n_steps: int | None = None) -> ControlledPath:
    """Controlled paths reflected along the action boundary (optionally
    shifted): initial jump onto the barrier, then per-step projection. An
    everywhere-undefined b means no constraint, so the result coincides
    bit for bit with the uncontrolled paths."""
    _check_start(model, t0, x0)
    n = bundle.n_steps if n_steps is None else n_steps
    times = bundle.times(n)
    barrier = fb.b_curve(t0 + times) + shift
    x = np.empty((bundle.n_paths, n + 1))
    dnu = np.zeros((bundle.n_paths, n + 1))
    absorbed = np.zeros(bundle.n_paths, dtype=bool)
    absorb_step = np.full(bundle.n_paths, -1, dtype=np.int64)
    for lo in range(0, bundle.n_paths, _BLOCK):
        hi = min(lo + _BLOCK, bundle.n_paths)
        dW = bundle.block_increments(lo, hi, n)
        xb, db, ab, sb = _euler_block(model, lambda xk: model.mu(xk), x0, barrier,
                                      dW, bundle.dt_sim)
        x[lo:hi] = xb
        dnu[lo:hi] = db
        absorbed[lo:hi] = ab
        absorb_step[lo:hi] = sb
    return ControlledPath(t0=t0, x0_pre=float(x0), times=times, x=x, dnu=dnu,
                          absorbed=absorbed, absorb_step=absorb_step)


def first_hitting(times, values, curve, direction, x0_pre=None):
    """First crossing of a sampled curve, capped at the horizon.

    times: (n+1,) durations; values: (n_paths, n+1); curve: (n+1,).
    direction "down" detects values <= curve, "up" detects values >= curve.
    x0_pre, when given, is a common pre-jump starting state also checked at
    step 0. Returns (tau, step, hit): sub-step linearly refined crossing
    times, the first step index at/after the crossing (the horizon index
    for paths that never cross), and the crossing mask.
    """
    values = np.asarray(values, dtype=float)
    curve = np.asarray(curve, dtype=float)
    times = np.asarray(times, dtype=float)
    if direction == DOWN:
        w = values - curve[None, :]
        pre_hit = (x0_pre is not None) and (x0_pre <= curve[0])
    elif direction == UP:
        w = curve[None, :] - values
        pre_hit = (x0_pre is not None) and (x0_pre >= curve[0])
    else:
        raise ValueError(f"direction must be '{DOWN}' or '{UP}', got {direction!r}")

    crossed = w <= 0.0
    if pre_hit:
        crossed[:, 0] = True
    hit = crossed.any(axis=1)
    n = values.shape[1] - 1

    tau = np.full(values.shape[0], times[-1])
    step = np.full(values.shape[0], n, dtype=np.int64)
    idx = np.nonzero(hit)[0]
    if idx.size:
        k = np.argmax(crossed[idx], axis=1)
        step[idx] = k
        later = k > 0
        il, kl = idx[later], k[later]
        w_prev = w[il, kl - 1]
        w_at = w[il, kl]
        frac = w_prev / (w_prev - w_at)
        tau[il] = times[kl - 1] + frac * (times[kl] - times[kl - 1])
        tau[idx[~later]] = 0.0
    return tau, step, hit


# ---------------------------------------------------------------------------
# strategy rules and payoffs
# ---------------------------------------------------------------------------

def stop_at_boundary(fb: FreeBoundaries, shift: float = 0.0):
    """Stop when the (controlled) state reaches the stopping boundary."""
    return ("stop-boundary", fb, float(shift))


def stop_at_time(s: float):
    """Stop after a fixed duration s (clipped to the horizon)."""
    return ("stop-time", float(s))


def stop_never():
    """Wait until the horizon."""
    return ("stop-never",)


def reflect_at_boundary(fb: FreeBoundaries, shift: float = 0.0):
    """Reflect along the action boundary (optionally shifted)."""
    return ("reflect-boundary", fb, float(shift))


def no_control():
    """Exert no control at all."""
    return ("control-null",)


def _stopper_taus(rule, times, x, x0_pre, t0):
    """Resolve a stopper rule on simulated paths: (tau, step)."""
    n = times.size - 1
    kind = rule[0]
    if kind == "stop-boundary":
        fbr, shift = rule[1], rule[2]
        curve = fbr.a_curve(t0 + times) + shift
        tau, step, _ = first_hitting(times, x, curve, DOWN, x0_pre=x0_pre)
        return tau, step
    if kind == "stop-time":
        s = min(max(rule[1], 0.0), float(times[-1]))
        k = int(np.searchsorted(times, s - 1e-12 * max(times[-1], 1.0)))
        m = x.shape[0]
        return np.full(m, s), np.full(m, min(k, n), dtype=np.int64)
    if kind == "stop-never":
        m = x.shape[0]
        return np.full(m, float(times[-1])), np.full(m, n, dtype=np.int64)
    raise ValueError(f"unknown stopper rule {rule!r}")


def _controller_barrier(rule, times, t0):
    kind = rule[0]
    if kind == "reflect-boundary":
        fbr, shift = rule[1], rule[2]
        return fbr.b_curve(t0 + times) + shift
    if kind == "control-null":
        return None
    raise ValueError(f"unknown controller rule {rule!r}")


def _payoff_block(model, t0, times, x, dnu, tau, step):
    """Per-path discounted payoff: stopping payoff at the refined time,
    left-endpoint running payoff with a partial final step, control cost
    over [0, tau] including the time-zero jump."""
    n = times.size - 1
    dt = float(times[1] - times[0]) if n > 0 else 0.0
    r = model.r
    disc = np.exp(-r * times)

    pay = np.exp(-r * tau) * np.asarray(model.g(t0 + tau), dtype=float)

    if n > 0:
        H = np.asarray(model.h(t0 + times[None, :-1], x[:, :-1]), dtype=float)
        karr = np.arange(n)[None, :]
        full_mask = karr < (step[:, None] - 1)
        partial_mask = karr == (step[:, None] - 1)
        weights = full_mask * dt + partial_mask * (tau[:, None] - times[None, :-1])
        pay = pay + np.sum(H * disc[None, :-1] * weights, axis=1)

    ctrl_mask = times[None, :] <= tau[:, None] + 1e-12 * max(dt, 1.0)
    pay = pay + model.alpha0 * np.sum(np.abs(dnu) * disc[None, :] * ctrl_mask, axis=1)
    return pay


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = float(np.sum(values) / n)
    if n < 2:
        return mean, 0.0
    var = float(np.sum((values - mean) ** 2) / (n - 1))
    return mean, math.sqrt(var / n)


@dataclass
class McReport:
    """Monte Carlo estimate with optional per-deviation rows."""

    estimate: float
    stderr: float
    n_paths: int
    seed: int
    rows: list = field(default_factory=list)
    config_hash: str = ""
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "rows": [dict(row) for row in self.rows],
            "config_hash": self.config_hash,
        }


def _validate_stopper_rule(rule):
    if rule[0] == "stop-boundary":
        fbr = rule[1]
        if not fbr.a_defined.any() and not fbr.all_stop.any():
            raise ValueError("stopping rule references a boundary that is "
                             "defined nowhere")


def mc_payoff(model: GameModel, t0: float, x0: float, stopper_rule,
              controller_rule, bundle: PathBundle) -> McReport:
    """Estimate the game payoff under one (stopper, controller) rule pair."""
    _check_start(model, t0, x0)
    _validate_stopper_rule(stopper_rule)
    n = bundle.n_steps
    times = bundle.times()
    barrier = _controller_barrier(controller_rule, times, t0)

    payoffs = np.empty(bundle.n_paths)
    for lo in range(0, bundle.n_paths, _BLOCK):
        hi = min(lo + _BLOCK, bundle.n_paths)
        dW = bundle.block_increments(lo, hi)
        x, dnu, _, _ = _euler_block(model, lambda xk: model.mu(xk), x0, barrier,
                                    dW, bundle.dt_sim)
        tau, step = _stopper_taus(stopper_rule, times, x, float(x0), t0)
        payoffs[lo:hi] = _payoff_block(model, t0, times, x, dnu, tau, step)

    estimate, stderr = _mean_stderr(payoffs)
    return McReport(estimate=estimate, stderr=stderr, n_paths=bundle.n_paths,
                    seed=bundle.master_seed)


DEFAULT_DEVIATIONS = (
    "stop-above", "stop-below", "stop-now", "stop-midway", "stop-horizon",
    "reflect-above", "reflect-below", "null-control",
)


def saddle_deviation_test(model: GameModel, t0: float, x0: float,
                          fb: FreeBoundaries, bundle: PathBundle,
                          deviations=None, delta: float | None = None) -> McReport:
    """Common-random-number deviation test around the candidate saddle.

    The baseline plays (stop at a, reflect along b). Stopper deviations
    re-stop the same controlled paths (shifted boundary by +-delta, fixed
    times 0, half-horizon, horizon) and must not gain more than 4 stderr
    of the paired difference; controller deviations re-simulate with the
    same noise (barrier shifted by +-delta, no control) and must not
    undercut the baseline by more than 4 stderr. deviations selects labels
    from DEFAULT_DEVIATIONS; delta defaults to 4 grid cells.
    """
    _check_start(model, t0, x0)
    if delta is None:
        delta = 4.0 * fb.dx
    labels = list(DEFAULT_DEVIATIONS if deviations is None else deviations)
    unknown = sorted(set(labels) - set(DEFAULT_DEVIATIONS))
    if unknown:
        raise ValueError(f"unknown deviation label(s): {unknown}")

    n = bundle.n_steps
    times = bundle.times()
    horizon = float(times[-1])

    saddle_stop = stop_at_boundary(fb, 0.0)
    _validate_stopper_rule(saddle_stop)
    stopper_devs = {
        "stop-above": stop_at_boundary(fb, +delta),
        "stop-below": stop_at_boundary(fb, -delta),
        "stop-now": stop_at_time(0.0),
        "stop-midway": stop_at_time(horizon / 2.0),
        "stop-horizon": stop_at_time(horizon),
    }
    controller_devs = {
        "reflect-above": reflect_at_boundary(fb, +delta),
        "reflect-below": reflect_at_boundary(fb, -delta),
        "null-control": no_control(),
    }
    stop_labels = [lb for lb in labels if lb in stopper_devs]
    ctrl_labels = [lb for lb in labels if lb in controller_devs]

    base = np.empty(bundle.n_paths)
    devs = {lb: np.empty(bundle.n_paths) for lb in stop_labels + ctrl_labels}

    barriers = {"saddle": _controller_barrier(reflect_at_boundary(fb), times, t0)}
    for lb in ctrl_labels:
        barriers[lb] = _controller_barrier(controller_devs[lb], times, t0)

    for lo in range(0, bundle.n_paths, _BLOCK):
        hi = min(lo + _BLOCK, bundle.n_paths)
        dW = bundle.block_increments(lo, hi)

        x, dnu, _, _ = _euler_block(model, lambda xk: model.mu(xk), x0,
                                    barriers["saddle"], dW, bundle.dt_sim)
        tau, stp = _stopper_taus(saddle_stop, times, x, float(x0), t0)
        base[lo:hi] = _payoff_block(model, t0, times, x, dnu, tau, stp)
        for lb in stop_labels:
            tau_d, stp_d = _stopper_taus(stopper_devs[lb], times, x, float(x0), t0)
            devs[lb][lo:hi] = _payoff_block(model, t0, times, x, dnu, tau_d, stp_d)

        for lb in ctrl_labels:
            xd, dnud, _, _ = _euler_block(model, lambda xk: model.mu(xk), x0,
                                          barriers[lb], dW, bundle.dt_sim)
            tau_d, stp_d = _stopper_taus(saddle_stop, times, xd, float(x0), t0)
            devs[lb][lo:hi] = _payoff_block(model, t0, times, xd, dnud, tau_d, stp_d)

    estimate, stderr = _mean_stderr(base)
    rows = []
    for lb in labels:
        vals = devs[lb]
        est_d, se_d = _mean_stderr(vals)
        diff_mean, diff_se = _mean_stderr(vals - base)
        z = diff_mean / diff_se if diff_se > 0 else 0.0
        rows.append({"label": lb, "estimate": est_d, "stderr": se_d,
                     "diff": diff_mean, "z": z})
    return McReport(estimate=estimate, stderr=stderr, n_paths=bundle.n_paths,
                    seed=bundle.master_seed, rows=rows,
                    extras={"delta": delta, "t0": t0, "x0": x0})


def default_approach(model: GameModel, fb: FreeBoundaries, target, n_stages: int = 14):
    """Geometric approach to (t, y) from up to four axis directions.

    Fourteen halvings take the state offset down to about 6e-6 of the
    window, fine enough for the mean stopping-time difference (roughly
    linear in the offset under common noise) to drop below one
    simulation step.

    A target on the action boundary is approached within the closed
    action region (along the curve in time, and from above in state):
    approaching from strictly inside the inaction region, the discrete
    first crossing of the rising curve keeps an O(sqrt(dt_sim)) floor
    however close the start is, so the continuous-time limit is only
    observable from the side where stopping is immediate."""
    t_star, y_star = float(target[0]), float(target[1])
    dt0 = 0.1 * (model.T - t_star)
    dy0 = 0.05 * (fb.x_hi - fb.x_lo)

    b_star = float(fb.b_curve(np.array([t_star]))[0])
    on_boundary = np.isfinite(b_star) and abs(y_star - b_star) <= 2.0 * fb.dx

    out = []
    directions = (("t-up", dt0, 0.0), ("t-down", -min(dt0, t_star), 0.0),
                  ("y-up", 0.0, dy0), ("y-down", 0.0, -dy0))
    if on_boundary:
        directions = tuple(d for d in directions if d[0] != "y-down")
    for label, off_t, off_y in directions:
        if off_t == 0.0 and off_y == 0.0:
            continue
        for i in range(n_stages):
            f = 0.5 ** i
            t_n = min(max(t_star + off_t * f, 0.0), model.T)
            if on_boundary and off_t != 0.0:
                y_n = float(fb.b_curve(np.array([t_n]))[0])
                if not np.isfinite(y_n):
                    y_n = y_star
            else:
                y_n = y_star + off_y * f
            if model.domain_kind == HALF_LINE:
                y_n = max(y_n, 0.0)
            out.append((label, i, t_n, y_n))
    return out


def _hitting_times_from(model, t0, y0, fb, bundle, kind):
    """Mean-field free or reflected run from (t0, y0): per-path boundary
    hitting times, streamed in blocks."""
    n = max(int(round((model.T - t0) / bundle.dt_sim)), 1)
    if n > bundle.n_steps:
        raise ValueError("bundle has too few steps for this starting time")
    times = bundle.times(n)
    taus = np.empty(bundle.n_paths)
    if kind == "controller":
        curve = fb.b_curve(t0 + times)
        for lo in range(0, bundle.n_paths, _BLOCK):
            hi = min(lo + _BLOCK, bundle.n_paths)
            dW = bundle.block_increments(lo, hi, n)
            x, _, _, _ = _euler_block(model, lambda yk: model.y_drift(yk), y0,
                                      None, dW, bundle.dt_sim)
            taus[lo:hi], _, _ = first_hitting(times, x, curve, UP)
    elif kind == "stopper":
        curve = fb.a_curve(t0 + times)
        barrier = fb.b_curve(t0 + times)
        for lo in range(0, bundle.n_paths, _BLOCK):
            hi = min(lo + _BLOCK, bundle.n_paths)
            dW = bundle.block_increments(lo, hi, n)
            x, _, _, _ = _euler_block(model, lambda xk: model.mu(xk), y0,
                                      barrier, dW, bundle.dt_sim)
            taus[lo:hi], _, _ = first_hitting(times, x, curve, DOWN, x0_pre=float(y0))
    else:
        raise ValueError(f"kind must be 'controller' or 'stopper', got {kind!r}")
    return taus


def stopping_time_convergence(model: GameModel, fb: FreeBoundaries, target,
                              bundle: PathBundle, approach=None,
                              kind: str = "controller") -> dict:
    """Stability of the optimal stopping rules in their starting point.

    For each (t_n, y_n) of the approach sequence the per-path boundary
    hitting time is compared, on common noise, against the one from the
    target; rows report the mean absolute difference and the mean hitting
    time itself (the relevant quantity when the target sits on the
    boundary, where the limit is zero). kind "controller" uses the
    drift-corrected free paths against b, "stopper" the reflected paths
    against a.
    """
    t_star, y_star = float(target[0]), float(target[1])
    if approach is None:
        approach = default_approach(model, fb, target)
    ref = _hitting_times_from(model, t_star, y_star, fb, bundle, kind)
    rows = []
    for label, stage, t_n, y_n in approach:
        taus = _hitting_times_from(model, t_n, y_n, fb, bundle, kind)
        rows.append({
            "direction": label, "stage": int(stage), "t": t_n, "y": y_n,
            "mean_abs_diff": float(np.sum(np.abs(taus - ref)) / taus.size),
            "mean_time": float(np.sum(taus) / taus.size),
        })
    return {
        "kind": kind,
        "target": [t_star, y_star],
        "dt_sim": bundle.dt_sim,
        "mean_time_at_target": float(np.sum(ref) / ref.size),
        "rows": rows,
    }


def moment_growth_experiment(model: GameModel, t0: float, fb: FreeBoundaries,
                             bundle: PathBundle, x_points=None) -> dict:
    """Growth of the control effort and path supremum in the start state.

    For each starting state, reflected paths run to the horizon and the
    second moments of the total control variation and of the running
    supremum |X| are estimated on common noise; the returned slopes are
    the fitted log-log exponents against 1 + x0^2.
    """
    if x_points is None:
        span = fb.x_hi - fb.x_lo
        x_points = np.linspace(fb.x_lo + 0.55 * span, fb.x_hi - 0.02 * span, 5)
    x_points = np.asarray(x_points, dtype=float)

    times = bundle.times()
    barrier = fb.b_curve(t0 + times)
    points = []
    for x0 in x_points:
        nu_sq = np.empty(bundle.n_paths)
        sup_sq = np.empty(bundle.n_paths)
        for lo in range(0, bundle.n_paths, _BLOCK):
            hi = min(lo + _BLOCK, bundle.n_paths)
            dW = bundle.block_increments(lo, hi)
            x, dnu, _, _ = _euler_block(model, lambda xk: model.mu(xk), float(x0),
                                        barrier, dW, bundle.dt_sim)
            nu_sq[lo:hi] = np.sum(np.abs(dnu), axis=1) ** 2
            # the state visits x0 before the time-0 jump, so the running
            # supremum starts there
            sup_sq[lo:hi] = np.maximum(np.max(np.abs(x), axis=1), abs(x0)) ** 2
        points.append({
            "x0": float(x0),
            "mean_nu_sq": float(np.sum(nu_sq) / nu_sq.size),
            "mean_sup_sq": float(np.sum(sup_sq) / sup_sq.size),
        })

    basis = np.log1p(x_points ** 2)

    def fit(key):
        vals = np.array([p[key] for p in points])
        keep = vals > 0
        if keep.sum() < 3:
            return None
        coeff = np.polyfit(basis[keep], np.log(vals[keep]), 1)
        return float(coeff[0])

    return {
        "t0": t0,
        "points": points,
        "slope_nu": fit("mean_nu_sq"),
        "slope_sup": fit("mean_sup_sq"),
    }
