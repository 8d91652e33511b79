"""Independent binomial-tree oracle for the game value.

A recombining tree approximates the controlled diffusion: from node x the
state moves one space step up or down with probability matched to the
drift, the stopper may take g at any node, and the controller may push the
state down one node at cost alpha0 per unit. The backward induction below
shares no code with the package's PDE solvers (no upwind stencil, no
Gauss-Seidel, no projection kernels); the gradient cap is applied through
a running-minimum identity instead of a sweep.

The step probability is p = (1 + mu(x) sqrt(dt)/sigma)/2 with space step
dx = sigma sqrt(dt), the standard weak-order-one matching for constant
volatility, so the oracle only supports whole-line models. Its leading
error is O(dt); `richardson_tree_value` removes it by extrapolating from
n and 2n time steps.
"""

from __future__ import annotations

import math

import numpy as np


def tree_value(model, x_lo: float, x_hi: float, n_steps: int, x_eval: float) -> float:
    if model.domain_kind != "R":
        raise ValueError("the tree oracle supports whole-line models only")
    sigma = model.sigma_param
    if sigma <= 0:
        raise ValueError("the tree oracle needs positive volatility")
    dt = model.T / n_steps
    dx = sigma * math.sqrt(dt)
    root_dt_over_sigma = math.sqrt(dt) / sigma

    k_lo = int(math.floor((x_eval - x_lo) / dx))
    k_hi = int(math.floor((x_hi - x_eval) / dx))
    if k_lo < 2 or k_hi < 2:
        raise ValueError("window too narrow for the tree lattice")
    x = x_eval + dx * np.arange(-k_lo, k_hi + 1)
    i_eval = k_lo

    disc = math.exp(-model.r * dt)
    alpha_x = model.alpha0 * x

    w = np.full(x.size, float(model.g(model.T)))
    for j in range(n_steps - 1, -1, -1):
        t = j * dt
        p = np.clip(0.5 * (1.0 + np.asarray(model.mu(x), dtype=float) * root_dt_over_sigma),
                    0.0, 1.0)
        up = np.empty_like(w)
        up[:-1] = w[1:]
        up[-1] = w[-1]
        dn = np.empty_like(w)
        dn[1:] = w[:-1]
        dn[0] = w[0]
        cont = disc * (p * up + (1.0 - p) * dn) + np.asarray(model.h(t, x), dtype=float) * dt
        w = np.maximum(cont, float(model.g(t)))
        # pushing down k nodes costs alpha0*k*dx, so the reachable value is
        # min over lower nodes of w + alpha0*(distance); a running minimum
        # of (w - alpha0*x) gives it in one pass
        w = np.minimum(w, np.minimum.accumulate(w - alpha_x) + alpha_x)
    return float(w[i_eval])


def richardson_tree_value(model, x_lo: float, x_hi: float, x_eval: float,
                          n_steps: int = 100) -> float:
    """Extrapolate the O(dt) tree bias away using n and 2n time steps."""
    v1 = tree_value(model, x_lo, x_hi, n_steps, x_eval)
    v2 = tree_value(model, x_lo, x_hi, 2 * n_steps, x_eval)
    return 2.0 * v2 - v1
