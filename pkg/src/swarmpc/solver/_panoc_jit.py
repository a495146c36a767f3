"""Nopython PANOC loop for problems that supply a jitted augmented-cost oracle.

Mirrors :func:`swarmpc.solver.panoc.panoc_solve` step for step; the oracle has
the signature ``oracle(u, c, y, data, want_grad, grad_out) -> psi``.
"""

import numpy as np
from numba import njit

from swarmpc.solver._clock import monotonic
from swarmpc.solver._lbfgs import _two_loop

GAMMA_L = 0.95
LS_BETA = 0.5
MAX_BACKTRACKS = 10
MIN_LIPSCHITZ = 1e-6

NONFINITE = -1
STEP_COLLAPSE = -2


@njit(cache=True, nogil=True)
def _dot(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


@njit(cache=True, nogil=True)
def _refresh(u, g, psi, gamma, lo, hi, ubar, r):
    """Half step and residual; returns the forward-backward envelope value."""
    gr = 0.0
    rr = 0.0
    for i in range(u.shape[0]):
        v = u[i] - gamma * g[i]
        if v < lo[i]:
            v = lo[i]
        elif v > hi[i]:
            v = hi[i]
        ubar[i] = v
        r[i] = u[i] - v
        gr += g[i] * r[i]
        rr += r[i] * r[i]
    return psi - gr + rr / (2.0 * gamma)


@njit(nogil=True)
def panoc_core(oracle, data, c, y, u0, lo, hi, eps_bar, max_iters, remaining,
               S, Y, rho, u_out):
    """Returns ``(iterations, fpr_norm, code)``; code 1 converged, 0 out of budget, <0 error."""
    n = u0.shape[0]
    m = S.shape[0]
    clockbuf = np.zeros(2, dtype=np.int64)
    deadline = monotonic(clockbuf) + remaining
    head = 0
    count = 0

    u = np.empty(n)
    for i in range(n):
        u[i] = min(max(u0[i], lo[i]), hi[i])
    g = np.empty(n)
    ubar = np.empty(n)
    r = np.empty(n)
    un = np.empty(n)
    gn = np.empty(n)
    ubarn = np.empty(n)
    rn = np.empty(n)
    d = np.empty(n)
    q = np.empty(n)
    tmp = np.empty(n)

    psi = oracle(u, c, y, data, True, g)
    if not np.isfinite(psi) or not np.all(np.isfinite(g)):
        return 0, np.inf, NONFINITE

    hh = 0.0
    for i in range(n):
        h = max(1e-6, 1e-6 * abs(u[i]))
        tmp[i] = u[i] + h
        hh += h * h
    oracle(tmp, c, y, data, True, gn)
    dg = 0.0
    for i in range(n):
        dg += (gn[i] - g[i]) ** 2
    lip = max(MIN_LIPSCHITZ, np.sqrt(dg / hh))
    gamma = GAMMA_L / lip
    fbe = _refresh(u, g, psi, gamma, lo, hi, ubar, r)

    # Lipschitz backtracking at the initial point
    ok = False
    for _ in range(60):
        psi_bar = oracle(ubar, c, y, data, False, tmp)
        bound = psi - _dot(g, r) + 0.5 * (GAMMA_L / gamma) * _dot(r, r)
        if psi_bar <= bound + 1e-12 * max(1.0, abs(psi)):
            ok = True
            break
        gamma *= 0.5
        count = 0
        fbe = _refresh(u, g, psi, gamma, lo, hi, ubar, r)
    if not ok:
        return 0, np.inf, STEP_COLLAPSE

    it = 0
    while True:
        fpr = 0.0
        for i in range(n):
            fpr = max(fpr, abs(r[i]))
        fpr /= gamma
        if fpr <= eps_bar or it >= max_iters or monotonic(clockbuf) >= deadline:
            for i in range(n):
                u_out[i] = ubar[i]
            return it, fpr, 1 if fpr <= eps_bar else 0

        if count == 0:
            for i in range(n):
                d[i] = -r[i]
        else:
            for i in range(n):
                q[i] = r[i] / gamma
            _two_loop(S, Y, rho, head, count, q, d)
            for i in range(n):
                d[i] = -d[i]
        sigma = LS_BETA * (1.0 - GAMMA_L) / (2.0 * gamma)
        threshold = fbe - sigma * _dot(r, r)
        tau = 1.0
        fbe_n = 0.0
        psi_n = 0.0
        for k in range(MAX_BACKTRACKS + 1):
            if k == MAX_BACKTRACKS:
                tau = 0.0
            if tau == 0.0:
                for i in range(n):
                    un[i] = ubar[i]
            else:
                for i in range(n):
                    un[i] = u[i] - (1.0 - tau) * r[i] + tau * d[i]
            psi_n = oracle(un, c, y, data, True, gn)
            if not np.isfinite(psi_n) or not np.all(np.isfinite(gn)):
                return it, np.inf, NONFINITE
            fbe_n = _refresh(un, gn, psi_n, gamma, lo, hi, ubarn, rn)
            if tau == 0.0 or fbe_n <= threshold:
                break
            tau *= 0.5
        it += 1

        # candidate curvature pair, before any step-size change
        for i in range(n):
            d[i] = un[i] - u[i]
            q[i] = -r[i] / gamma
        u, un = un, u
        g, gn = gn, g
        ubar, ubarn = ubarn, ubar
        r, rn = rn, r
        psi = psi_n
        fbe = fbe_n

        old_gamma = gamma
        ok = False
        for _ in range(60):
            psi_bar = oracle(ubar, c, y, data, False, tmp)
            bound = psi - _dot(g, r) + 0.5 * (GAMMA_L / gamma) * _dot(r, r)
            if psi_bar <= bound + 1e-12 * max(1.0, abs(psi)):
                ok = True
                break
            gamma *= 0.5
            count = 0
            fbe = _refresh(u, g, psi, gamma, lo, hi, ubar, r)
        if not ok:
            return it, np.inf, STEP_COLLAPSE
        if gamma == old_gamma:
            for i in range(n):
                q[i] += r[i] / gamma
            sy = _dot(d, q)
            ss = _dot(d, d)
            if ss > 0.0 and sy > 1e-12 * ss:
                for i in range(n):
                    S[head, i] = d[i]
                    Y[head, i] = q[i]
                rho[head] = 1.0 / sy
                head = (head + 1) % m
                count = min(count + 1, m)
