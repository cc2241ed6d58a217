"""Numba-compiled inner loops.

Each kernel advances a model by ``len(z)`` Euler-Maruyama steps of size dt,
reading pre-drawn standard normal deviates so that trajectories are
bit-identical to the pure-Python steppers fed from the same NoiseStream.
Delay history lives in a ring buffer of capacity delay_steps + 1 with
read-then-push semantics (read the delayed value, update, push the new one).

State layout conventions:
  single:    [x_T, v_T, x_M, v_M]
  coupled:   [q_T, v_qT, q_M1, v_M1, q_M2, v_M2]
  nonlinear: [theta, omega]
  relative single (homogeneous form):  [delta, delta_v]
  relative coupled (homogeneous form): [d1, dv1, d2, dv2]

Kernels return a divergence step index (-1 when the run completed).
"""

import numpy as np
from numba import njit, prange

GUARD = 1e12
_RENORM_GUARD = 1e280


@njit(cache=True, nogil=True)
def run_single(state, hist, cur, z, gamma, alpha, beta, nu, dt, ds, out):
    """Advance the absolute-coordinate single model by len(z) steps.

    ``out`` has shape (5, n_steps//ds + 1): rows x_T, v_T, x_M, v_M, u.
    Returns (cursor, n_recorded, div_step).
    """
    cap = hist.shape[0]
    sqdt = np.sqrt(dt)
    n = z.shape[0]
    nrec = 0
    cursor = cur
    for i in range(n):
        d_del = hist[cursor]
        if i % ds == 0:
            out[0, nrec] = state[0]
            out[1, nrec] = state[1]
            out[2, nrec] = state[2]
            out[3, nrec] = state[3]
            out[4, nrec] = beta * d_del * (1.0 + nu * z[i] / sqdt)
            nrec += 1
        d_now = state[0] - state[2]
        vT = state[1] + dt * (-gamma * state[1] + alpha * d_now)
        vM = (state[3] + dt * (-gamma * state[3] + beta * d_del)
              + beta * nu * d_del * sqdt * z[i])
        xT = state[0] + dt * state[1]
        xM = state[2] + dt * state[3]
        state[0] = xT
        state[1] = vT
        state[2] = xM
        state[3] = vM
        hist[cursor] = xT - xM
        cursor = (cursor + 1) % cap
        bad = False
        for j in range(4):
            if not np.isfinite(state[j]) or abs(state[j]) > GUARD:
                bad = True
        if bad:
            return cursor, nrec, i + 1
    if n % ds == 0:
        d_del = hist[cursor]
        out[0, nrec] = state[0]
        out[1, nrec] = state[1]
        out[2, nrec] = state[2]
        out[3, nrec] = state[3]
        out[4, nrec] = beta * d_del
        nrec += 1
    return cursor, nrec, -1


@njit(cache=True, nogil=True)
def run_coupled(state, hist1, hist2, cur1, cur2, z1, z2,
                gamma, alpha, beta, nu, dt, ds, out):
    """Advance the coupled model (shared tip, two noisy controllers).

    ``out`` rows: q_T, v_qT, q_M1, v_M1, q_M2, v_M2, u1, u2.
    Returns (cursor1, cursor2, n_recorded, div_step).
    """
    cap1 = hist1.shape[0]
    cap2 = hist2.shape[0]
    sqdt = np.sqrt(dt)
    n = z1.shape[0]
    nrec = 0
    c1 = cur1
    c2 = cur2
    for i in range(n):
        d1_del = hist1[c1]
        d2_del = hist2[c2]
        if i % ds == 0:
            for j in range(6):
                out[j, nrec] = state[j]
            out[6, nrec] = beta * d1_del * (1.0 + nu * z1[i] / sqdt)
            out[7, nrec] = beta * d2_del * (1.0 + nu * z2[i] / sqdt)
            nrec += 1
        d1 = state[0] - state[2]
        d2 = state[0] - state[4]
        vT = state[1] + dt * (-gamma * state[1] + 0.5 * alpha * (d1 + d2))
        vM1 = (state[3] + dt * (-gamma * state[3] + beta * d1_del)
               + beta * nu * d1_del * sqdt * z1[i])
        vM2 = (state[5] + dt * (-gamma * state[5] + beta * d2_del)
               + beta * nu * d2_del * sqdt * z2[i])
        qT = state[0] + dt * state[1]
        qM1 = state[2] + dt * state[3]
        qM2 = state[4] + dt * state[5]
        state[0] = qT
        state[1] = vT
        state[2] = qM1
        state[3] = vM1
        state[4] = qM2
        state[5] = vM2
        hist1[c1] = qT - qM1
        c1 = (c1 + 1) % cap1
        hist2[c2] = qT - qM2
        c2 = (c2 + 1) % cap2
        bad = False
        for j in range(6):
            if not np.isfinite(state[j]) or abs(state[j]) > GUARD:
                bad = True
        if bad:
            return c1, c2, nrec, i + 1
    if n % ds == 0:
        for j in range(6):
            out[j, nrec] = state[j]
        out[6, nrec] = beta * hist1[c1]
        out[7, nrec] = beta * hist2[c2]
        nrec += 1
    return c1, c2, nrec, -1


@njit(cache=True, nogil=True)
def run_nonlinear(state, hist, cur, z, gamma, alpha, beta, nu, dt, ds, out):
    """Advance the nonlinear stick model; out rows: theta, omega, u."""
    cap = hist.shape[0]
    sqdt = np.sqrt(dt)
    n = z.shape[0]
    nrec = 0
    cursor = cur
    for i in range(n):
        th_del = hist[cursor]
        if i % ds == 0:
            out[0, nrec] = state[0]
            out[1, nrec] = state[1]
            out[2, nrec] = beta * th_del * (1.0 + nu * z[i] / sqdt)
            nrec += 1
        om = (state[1] + dt * (-gamma * state[1] + alpha * np.sin(state[0]) - beta * th_del)
              - beta * nu * th_del * sqdt * z[i])
        th = state[0] + dt * state[1]
        state[0] = th
        state[1] = om
        hist[cursor] = th
        cursor = (cursor + 1) % cap
        if (not np.isfinite(th) or abs(th) > GUARD
                or not np.isfinite(om) or abs(om) > GUARD):
            return cursor, nrec, i + 1
    if n % ds == 0:
        out[0, nrec] = state[0]
        out[1, nrec] = state[1]
        out[2, nrec] = beta * hist[cursor]
        nrec += 1
    return cursor, nrec, -1


@njit(cache=True, nogil=True)
def lyap_single(state, hist, cur, z, gamma, alpha, beta, nu, dt,
                renorm_every, logs, full_norm):
    """Homogeneous relative-form single model with periodic renormalization.

    Writes log of the growth factor per renorm interval into ``logs``
    (length len(z)//renorm_every).  ``full_norm`` selects the
    history-inclusive norm instead of the headline (delta, delta_v) norm.
    Returns (cursor, status): status 0 ok, 1 overflow between renorms.
    """
    cap = hist.shape[0]
    sqdt = np.sqrt(dt)
    n = z.shape[0]
    cursor = cur
    k = 0
    for i in range(n):
        d_del = hist[cursor]
        dv = (state[1] + dt * (-gamma * state[1] + alpha * state[0] - beta * d_del)
              - beta * nu * d_del * sqdt * z[i])
        d = state[0] + dt * state[1]
        state[0] = d
        state[1] = dv
        hist[cursor] = d
        cursor = (cursor + 1) % cap
        if (i + 1) % renorm_every == 0:
            nrm2 = state[0] * state[0] + state[1] * state[1]
            if full_norm:
                for j in range(cap):
                    nrm2 += hist[j] * hist[j]
            nrm = np.sqrt(nrm2)
            if not np.isfinite(nrm) or nrm > _RENORM_GUARD or nrm == 0.0:
                return cursor, 1
            logs[k] = np.log(nrm)
            k += 1
            inv = 1.0 / nrm
            state[0] *= inv
            state[1] *= inv
            for j in range(cap):
                hist[j] *= inv
    return cursor, 0


@njit(cache=True, nogil=True)
def lyap_coupled(state, hist1, hist2, cur1, cur2, z1, z2,
                 gamma, alpha, beta, nu, dt, renorm_every, logs, full_norm):
    """Homogeneous relative-form coupled model with renormalization.

    State [d1, dv1, d2, dv2]; headline norm is the Euclid norm of that
    4-vector.  Returns (cursor1, cursor2, status).
    """
    cap1 = hist1.shape[0]
    cap2 = hist2.shape[0]
    sqdt = np.sqrt(dt)
    n = z1.shape[0]
    c1 = cur1
    c2 = cur2
    k = 0
    for i in range(n):
        d1_del = hist1[c1]
        d2_del = hist2[c2]
        coup = 0.5 * alpha * (state[0] + state[2])
        dv1 = (state[1] + dt * (-gamma * state[1] + coup - beta * d1_del)
               - beta * nu * d1_del * sqdt * z1[i])
        dv2 = (state[3] + dt * (-gamma * state[3] + coup - beta * d2_del)
               - beta * nu * d2_del * sqdt * z2[i])
        d1 = state[0] + dt * state[1]
        d2 = state[2] + dt * state[3]
        state[0] = d1
        state[1] = dv1
        state[2] = d2
        state[3] = dv2
        hist1[c1] = d1
        c1 = (c1 + 1) % cap1
        hist2[c2] = d2
        c2 = (c2 + 1) % cap2
        if (i + 1) % renorm_every == 0:
            nrm2 = (state[0] * state[0] + state[1] * state[1]
                    + state[2] * state[2] + state[3] * state[3])
            if full_norm:
                for j in range(cap1):
                    nrm2 += hist1[j] * hist1[j]
                for j in range(cap2):
                    nrm2 += hist2[j] * hist2[j]
            nrm = np.sqrt(nrm2)
            if not np.isfinite(nrm) or nrm > _RENORM_GUARD or nrm == 0.0:
                return c1, c2, 1
            logs[k] = np.log(nrm)
            k += 1
            inv = 1.0 / nrm
            for j in range(4):
                state[j] *= inv
            for j in range(cap1):
                hist1[j] *= inv
            for j in range(cap2):
                hist2[j] *= inv
    return c1, c2, 0


@njit(cache=True, nogil=True, parallel=True)
def stcc_windows(x, y, starts, n, lags, out):
    """Windowed, mean-removed, variance-normalized cross-correlation.

    For window w starting at sample ``starts[w]`` and lag k (in samples):
    R = <(x(s)-m_x)(y(s+k)-m_y)> / (sigma_x sigma_y), with x statistics
    over the window and y statistics over the lag-shifted segment actually
    entering the products (Cauchy-Schwarz then bounds |R| by 1).
    ``out`` has shape (len(starts), len(lags)).
    """
    for w in prange(len(starts)):
        i0 = starts[w]
        mx = 0.0
        for s in range(n):
            mx += x[i0 + s]
        mx /= n
        vx = 0.0
        for s in range(n):
            dxs = x[i0 + s] - mx
            vx += dxs * dxs
        sx = np.sqrt(vx / n)
        for li in range(len(lags)):
            k = lags[li]
            j0 = i0 + k
            my = 0.0
            for s in range(n):
                my += y[j0 + s]
            my /= n
            vy = 0.0
            c = 0.0
            for s in range(n):
                dys = y[j0 + s] - my
                vy += dys * dys
                c += (x[i0 + s] - mx) * dys
            sy = np.sqrt(vy / n)
            if sx > 0.0 and sy > 0.0:
                out[w, li] = (c / n) / (sx * sy)
            else:
                out[w, li] = np.nan
