"""Jitted single-shooting oracles for the NMPC problem.

``par`` packs the cost data as
``[x_ref(8), u_ref(3), u_prev(3), q_x(8), q_u(3), q_du(3), q_t(8)]``.
Obstacle centers ``obs`` have shape (n_obs, N+1, 3); constraint ``l = i*N + (j-1)``
belongs to obstacle ``i`` at prediction step ``j = 1..N``.
"""

import numpy as np
from numba import njit


PAR_XREF = 0
PAR_UREF = 8
PAR_UPREV = 11
PAR_QX = 14
PAR_QU = 22
PAR_QDU = 25
PAR_QT = 28
PAR_LEN = 36


@njit(cache=True, nogil=True, error_model="numpy")
def _rollout_trig(x0, useq, prm, xs, trig):
    """Euler rollout that also stores sin/cos of roll and pitch at each step."""
    dt = prm[8]
    for i in range(8):
        xs[0, i] = x0[i]
    for j in range(useq.shape[0]):
        x = xs[j]
        nx = xs[j + 1]
        T = useq[j, 0]
        sphi, cphi = np.sin(x[6]), np.cos(x[6])
        sth, cth = np.sin(x[7]), np.cos(x[7])
        trig[j, 0] = sphi
        trig[j, 1] = cphi
        trig[j, 2] = sth
        trig[j, 3] = cth
        nx[0] = x[0] + dt * x[3]
        nx[1] = x[1] + dt * x[4]
        nx[2] = x[2] + dt * x[5]
        nx[3] = x[3] + dt * (T * sth * cphi - prm[0] * x[3])
        nx[4] = x[4] + dt * (-T * sphi - prm[1] * x[4])
        nx[5] = x[5] + dt * (T * cth * cphi - prm[7] - prm[2] * x[5])
        nx[6] = x[6] + dt * ((prm[3] * useq[j, 1] - x[6]) / prm[5])
        nx[7] = x[7] + dt * ((prm[4] * useq[j, 2] - x[7]) / prm[6])


@njit(cache=True, nogil=True, error_model="numpy")
def _adj_step(tr, u, prm, lam, gu):
    """``gu += B^T lam`` then ``lam <- A^T lam`` for the Euler step with cached trig ``tr``."""
    dt = prm[8]
    T = u[0]
    sphi, cphi, sth, cth = tr[0], tr[1], tr[2], tr[3]
    l3, l4, l5, l6, l7 = lam[3], lam[4], lam[5], lam[6], lam[7]
    gu[0] += dt * (sth * cphi * l3 - sphi * l4 + cth * cphi * l5)
    gu[1] += dt * prm[3] / prm[5] * l6
    gu[2] += dt * prm[4] / prm[6] * l7
    lam[6] = (dt * T * (-sth * sphi * l3 - cphi * l4 - cth * sphi * l5)
              + (1.0 - dt / prm[5]) * l6)
    lam[7] = dt * T * (cth * cphi * l3 - sth * cphi * l5) + (1.0 - dt / prm[6]) * l7
    lam[3] = dt * lam[0] + (1.0 - dt * prm[0]) * l3
    lam[4] = dt * lam[1] + (1.0 - dt * prm[1]) * l4
    lam[5] = dt * lam[2] + (1.0 - dt * prm[2]) * l5


@njit(cache=True, nogil=True, error_model="numpy")
def psi_oracle(u, c, y, data, want_grad, grad):
    """Augmented cost and (optionally) its gradient; ``c <= 0`` drops the penalty.

    ``data = (x0, prm, par, obs, rad, xs, trig)`` with workspaces ``xs`` (N+1, 8)
    and ``trig`` (N, 4).
    """
    x0, prm, par, obs, rad, xs, trig = data
    N = xs.shape[0] - 1
    useq = u.reshape((N, 3))
    _rollout_trig(x0, useq, prm, xs, trig)
    n_obs = obs.shape[0]

    val = 0.0
    # state terms j = 0..N-1, terminal at N
    for j in range(N + 1):
        qoff = PAR_QT if j == N else PAR_QX
        for i in range(8):
            e = xs[j, i] - par[PAR_XREF + i]
            val += par[qoff + i] * e * e
    for j in range(N):
        for i in range(3):
            e = useq[j, i] - par[PAR_UREF + i]
            prev = par[PAR_UPREV + i] if j == 0 else useq[j - 1, i]
            d = useq[j, i] - prev
            val += par[PAR_QU + i] * e * e + par[PAR_QDU + i] * d * d

    # penalty multipliers z_l = max(0, h_l + y_l / c), stored as c * z_l
    zc = np.zeros(n_obs * N)
    if c > 0.0:
        for o in range(n_obs):
            r2 = rad[o] * rad[o]
            for j in range(1, N + 1):
                dx = xs[j, 0] - obs[o, j, 0]
                dy = xs[j, 1] - obs[o, j, 1]
                dz = xs[j, 2] - obs[o, j, 2]
                l = o * N + j - 1
                z = r2 - (dx * dx + dy * dy + dz * dz) + y[l] / c
                if z > 0.0:
                    val += 0.5 * c * z * z
                    zc[l] = c * z

    if not want_grad:
        return val

    lam = np.empty(8)
    for i in range(8):
        lam[i] = 2.0 * par[PAR_QT + i] * (xs[N, i] - par[PAR_XREF + i])
    for j in range(N - 1, -1, -1):
        # obstacle sources on p_{j+1}
        for o in range(n_obs):
            w = zc[o * N + j]
            if w != 0.0:
                for k in range(3):
                    lam[k] -= 2.0 * w * (xs[j + 1, k] - obs[o, j + 1, k])
        gu = grad[3 * j:3 * j + 3]
        for i in range(3):
            prev = par[PAR_UPREV + i] if j == 0 else useq[j - 1, i]
            g = (2.0 * par[PAR_QU + i] * (useq[j, i] - par[PAR_UREF + i])
                 + 2.0 * par[PAR_QDU + i] * (useq[j, i] - prev))
            if j < N - 1:
                g -= 2.0 * par[PAR_QDU + i] * (useq[j + 1, i] - useq[j, i])
            gu[i] = g
        _adj_step(trig[j], useq[j], prm, lam, gu)
        for i in range(8):
            lam[i] += 2.0 * par[PAR_QX + i] * (xs[j, i] - par[PAR_XREF + i])
    return val


@njit(cache=True, nogil=True, error_model="numpy")
def cmap_kernel(u, x0, prm, obs, rad, out, xs, trig):
    N = xs.shape[0] - 1
    _rollout_trig(x0, u.reshape((N, 3)), prm, xs, trig)
    for o in range(obs.shape[0]):
        r2 = rad[o] * rad[o]
        for j in range(1, N + 1):
            dx = xs[j, 0] - obs[o, j, 0]
            dy = xs[j, 1] - obs[o, j, 1]
            dz = xs[j, 2] - obs[o, j, 2]
            out[o * N + j - 1] = r2 - (dx * dx + dy * dy + dz * dz)


@njit(cache=True, nogil=True, error_model="numpy")
def cmap_jtv_kernel(u, x0, prm, obs, w, grad, xs, trig):
    N = xs.shape[0] - 1
    useq = u.reshape((N, 3))
    _rollout_trig(x0, useq, prm, xs, trig)
    lam = np.zeros(8)
    for j in range(N - 1, -1, -1):
        for o in range(obs.shape[0]):
            wl = w[o * N + j]
            if wl != 0.0:
                for k in range(3):
                    lam[k] -= 2.0 * wl * (xs[j + 1, k] - obs[o, j + 1, k])
        gu = grad[3 * j:3 * j + 3]
        gu[:] = 0.0
        _adj_step(trig[j], useq[j], prm, lam, gu)
