"""Numba kernels for the per-level projected Gauss-Seidel sweeps.

One "iteration" of either kernel is: a Gauss-Seidel relaxation pass over the
implicit level equation, then the constraint projections (lower obstacle and
left-to-right gradient cap for the value problem; upper cap at alpha0 for
the gradient problem), and the iteration stops when the sup-norm update of
the composite pass falls below the tolerance.

Edge nodes carry one-sided rows: the diffusion term is dropped (zero second
difference) and the drift term uses the one-sided difference into the
domain, treated implicitly when the drift points inward (diagonally
dominant) and evaluated on the already-solved later time level when it
points outward (keeps the within-level iteration a contraction for any
step ratio). At a window edge lying deep in the stopping (resp. action)
region, the projections pin the edge value to g (resp. to the capped ramp),
which reproduces the intended far-field conditions; for degenerate payoffs
with spatially constant solutions the one-sided rows are exact.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def value_level(v, v_next, g_j, h_row, mu_row, sig2_row, dt, dx, r, alpha0,
                lo_dirichlet, tol, max_iters, scratch):
    """Relax one time level of the min-max variational inequality.

    v is the working level (warm-started by the caller), v_next the already
    solved later level. Returns (iterations, last sup update); iterations is
    -1 when max_iters was exhausted.
    """
    n = v.shape[0]
    inv_dt = 1.0 / dt
    cap_step = alpha0 * dx
    delta = 0.0
    for it in range(max_iters):
        for i in range(n):
            scratch[i] = v[i]

        # Gauss-Seidel pass on the implicit level equation
        if lo_dirichlet:
            v[0] = g_j
        else:
            m0 = mu_row[0]
            if m0 >= 0.0:
                v[0] = (v_next[0] * inv_dt + h_row[0] + (m0 / dx) * v[1]) / (inv_dt + r + m0 / dx)
            else:
                v[0] = (v_next[0] * inv_dt + h_row[0] + m0 * (v_next[1] - v_next[0]) / dx) / (inv_dt + r)
        for i in range(1, n - 1):
            a = 0.5 * sig2_row[i] / (dx * dx)
            m = mu_row[i]
            if m >= 0.0:
                diag = inv_dt + r + 2.0 * a + m / dx
                rhs = v_next[i] * inv_dt + h_row[i] + a * (v[i - 1] + v[i + 1]) + (m / dx) * v[i + 1]
            else:
                diag = inv_dt + r + 2.0 * a - m / dx
                rhs = v_next[i] * inv_dt + h_row[i] + a * (v[i - 1] + v[i + 1]) + (-m / dx) * v[i - 1]
            v[i] = rhs / diag
        mN = mu_row[n - 1]
        if mN <= 0.0:
            v[n - 1] = (v_next[n - 1] * inv_dt + h_row[n - 1] + (-mN / dx) * v[n - 2]) / (inv_dt + r - mN / dx)
        else:
            v[n - 1] = (v_next[n - 1] * inv_dt + h_row[n - 1] + mN * (v_next[n - 1] - v_next[n - 2]) / dx) / (inv_dt + r)

        # lower obstacle
        for i in range(n):
            if v[i] < g_j:
                v[i] = g_j

        # gradient cap, left to right
        for i in range(n - 1):
            c = v[i] + cap_step
            if v[i + 1] > c:
                v[i + 1] = c

        delta = 0.0
        for i in range(n):
            d = abs(v[i] - scratch[i])
            if d > delta:
                delta = d
        if delta < tol:
            return it + 1, delta
    return -1, delta


@njit(cache=True)
def gradient_level(u, u_next, hx_row, mud_row, sig2_row, lam_row, dt, dx, alpha0,
                   k_absorb, d_absorb, tol, max_iters, scratch):
    """Relax one time level of the gradient obstacle problem.

    Nodes with index <= k_absorb are absorbed (u = 0). The first active node
    uses a shortened left stencil reaching the interpolated absorption point
    at distance d_absorb (0 < d_absorb <= dx), which realises the Dirichlet
    datum u = 0 at the off-grid boundary by linear interpolation. Returns
    (iterations, last sup update); iterations -1 on failure.
    """
    n = u.shape[0]
    inv_dt = 1.0 / dt

    if k_absorb >= n - 1:
        for i in range(n):
            u[i] = 0.0
        return 1, 0.0

    delta = 0.0
    for it in range(max_iters):
        for i in range(n):
            scratch[i] = u[i]

        for i in range(k_absorb + 1):
            u[i] = 0.0

        if k_absorb >= 0:
            m = k_absorb + 1  # first active node
            if m <= n - 2:
                d = d_absorb
                s2 = sig2_row[m]
                diag = inv_dt + lam_row[m] + s2 / (d * dx)
                rhs = u_next[m] * inv_dt + hx_row[m] + (s2 / (dx * (d + dx))) * u[m + 1]
                md = mud_row[m]
                if md >= 0.0:
                    diag += md / dx
                    rhs += (md / dx) * u[m + 1]
                else:
                    diag += -md / d
                u[m] = rhs / diag
            start = m + 1
        else:
            m0 = mud_row[0]
            diag = inv_dt + lam_row[0]
            rhs = u_next[0] * inv_dt + hx_row[0]
            if m0 >= 0.0:
                diag += m0 / dx
                rhs += (m0 / dx) * u[1]
            else:
                rhs += m0 * (u_next[1] - u_next[0]) / dx
            u[0] = rhs / diag
            start = 1

        for i in range(start, n - 1):
            a = 0.5 * sig2_row[i] / (dx * dx)
            md = mud_row[i]
            if md >= 0.0:
                diag = inv_dt + lam_row[i] + 2.0 * a + md / dx
                rhs = u_next[i] * inv_dt + hx_row[i] + a * (u[i - 1] + u[i + 1]) + (md / dx) * u[i + 1]
            else:
                diag = inv_dt + lam_row[i] + 2.0 * a - md / dx
                rhs = u_next[i] * inv_dt + hx_row[i] + a * (u[i - 1] + u[i + 1]) + (-md / dx) * u[i - 1]
            u[i] = rhs / diag

        if k_absorb < n - 1:
            mN = mud_row[n - 1]
            if mN <= 0.0:
                u[n - 1] = (u_next[n - 1] * inv_dt + hx_row[n - 1] + (-mN / dx) * u[n - 2]) / (inv_dt + lam_row[n - 1] - mN / dx)
            else:
                u[n - 1] = (u_next[n - 1] * inv_dt + hx_row[n - 1] + mN * (u_next[n - 1] - u_next[n - 2]) / dx) / (inv_dt + lam_row[n - 1])

        # upper cap and nonnegativity on active nodes
        for i in range(k_absorb + 1, n):
            if u[i] > alpha0:
                u[i] = alpha0
            elif u[i] < 0.0:
                u[i] = 0.0

        delta = 0.0
        for i in range(n):
            d2 = abs(u[i] - scratch[i])
            if d2 > delta:
                delta = d2
        if delta < tol:
            return it + 1, delta
    return -1, delta


@njit(cache=True)
def penalty_level(v, v_next, g_j, h_row, mu_row, sig2_row, dt, dx, r, alpha0,
                  eps, lo_dirichlet, tol, max_iters, scratch):
    """Relax one level of the penalised equation

        time difference + drift/diffusion - r v + h
            + (1/eps) (g - v)_+  -  (1/eps) (backward gradient - alpha0)_+  = 0.

    The gradient penalty is attached to the receiving node of the cap (the
    node whose left difference exceeds alpha0), which keeps the penalised
    system monotone. Indicators are frozen from the current iterate and the
    penalised linear rows are relaxed Gauss-Seidel style.
    """
    n = v.shape[0]
    inv_dt = 1.0 / dt
    pen = 1.0 / eps
    delta = 0.0
    for it in range(max_iters):
        for i in range(n):
            scratch[i] = v[i]

        if lo_dirichlet:
            v[0] = g_j
        else:
            m0 = mu_row[0]
            diag = inv_dt + r
            rhs = v_next[0] * inv_dt + h_row[0]
            if m0 >= 0.0:
                diag += m0 / dx
                rhs += (m0 / dx) * v[1]
            else:
                rhs += m0 * (v_next[1] - v_next[0]) / dx
            if v[0] < g_j:
                diag += pen
                rhs += pen * g_j
            v[0] = rhs / diag

        for i in range(1, n):
            if i < n - 1:
                a = 0.5 * sig2_row[i] / (dx * dx)
                m = mu_row[i]
                if m >= 0.0:
                    diag = inv_dt + r + 2.0 * a + m / dx
                    rhs = v_next[i] * inv_dt + h_row[i] + a * (v[i - 1] + v[i + 1]) + (m / dx) * v[i + 1]
                else:
                    diag = inv_dt + r + 2.0 * a - m / dx
                    rhs = v_next[i] * inv_dt + h_row[i] + a * (v[i - 1] + v[i + 1]) + (-m / dx) * v[i - 1]
            else:
                mN = mu_row[n - 1]
                if mN <= 0.0:
                    diag = inv_dt + r - mN / dx
                    rhs = v_next[i] * inv_dt + h_row[i] + (-mN / dx) * v[i - 1]
                else:
                    diag = inv_dt + r
                    rhs = v_next[i] * inv_dt + h_row[i] + mN * (v_next[i] - v_next[i - 1]) / dx
            if v[i] < g_j:
                diag += pen
                rhs += pen * g_j
            if (v[i] - v[i - 1]) / dx > alpha0:
                diag += pen / dx
                rhs += (pen / dx) * (v[i - 1] + alpha0 * dx)
            v[i] = rhs / diag

        delta = 0.0
        for i in range(n):
            d = abs(v[i] - scratch[i])
            if d > delta:
                delta = d
        if delta < tol:
            return it + 1, delta
    return -1, delta
