"""Compiled closed-loop right-hand side and fixed-step RK4 loop.

This mirrors :func:`bicsim.engine.ClosedLoop.derivative` on a network that has
been Kron-reduced to the generator buses.  Only flat float arrays cross the
boundary; the Python side owns all bookkeeping.

Machine rows of ``mp``: H, D, T_d0', X_d, X_d', X_q', r_a, omega_b, omega_s.
Controller rows of ``cp``: T_m^n, E_f^n, dT_max, dT_min, dE_max, dE_min, n, m.
Scalars in ``gains``: k_T, k_P, k_E, k, omega_s.
"""
import numpy as np
from numba import njit

OK, NONFINITE, BOUND, SINGULAR = 0, 1, 2, 3


@njit(cache=True)
def _solve_inplace(M, b):
    # Gaussian elimination with partial pivoting; returns False on a zero pivot
    m = b.size
    for col in range(m):
        piv = col
        best = abs(M[col, col])
        for r in range(col + 1, m):
            if abs(M[r, col]) > best:
                best = abs(M[r, col])
                piv = r
        if best == 0.0:
            return False
        if piv != col:
            for c in range(m):
                tmp = M[col, c]
                M[col, c] = M[piv, c]
                M[piv, c] = tmp
            tmp = b[col]
            b[col] = b[piv]
            b[piv] = tmp
        inv = 1.0 / M[col, col]
        for r in range(col + 1, m):
            f = M[r, col] * inv
            if f != 0.0:
                for c in range(col + 1, m):
                    M[r, c] -= f * M[col, c]
                b[r] -= f * b[col]
    for r in range(m - 1, -1, -1):
        acc = b[r]
        for c in range(r + 1, m):
            acc -= M[r, c] * b[c]
        b[r] = acc / M[r, r]
    return True


@njit(cache=True)
def _network(x, Yr, mp, out_vg, out_pq):
    """Solve the reduced network; fills terminal voltages and (i_d, T_e, P, Q)."""
    n = mp.shape[1]
    M = Yr.copy()
    rhs = np.zeros(2 * n)
    for k in range(n):
        d = x[k]
        E = x[2 * n + k]
        ra, Xdp, Xqp = mp[6, k], mp[4, k], mp[5, k]
        det = ra * ra + Xdp * Xqp
        c, s = np.cos(d), np.sin(d)
        # R Minv R^T with Minv = [[ra, Xdp], [-Xqp, ra]] / det
        m00, m01, m10, m11 = ra / det, Xdp / det, -Xqp / det, ra / det
        a00 = c * m00 - s * m10
        a01 = c * m01 - s * m11
        a10 = s * m00 + c * m10
        a11 = s * m01 + c * m11
        j = 2 * k
        M[j, j] += a00 * c - a01 * s
        M[j, j + 1] += a00 * s + a01 * c
        M[j + 1, j] += a10 * c - a11 * s
        M[j + 1, j + 1] += a10 * s + a11 * c
        rhs[j] = a00 * E
        rhs[j + 1] = a10 * E
    if not _solve_inplace(M, rhs):
        return False
    for k in range(n):
        d = x[k]
        E = x[2 * n + k]
        ra, Xdp, Xqp = mp[6, k], mp[4, k], mp[5, k]
        det = ra * ra + Xdp * Xqp
        c, s = np.cos(d), np.sin(d)
        vQ, vD = rhs[2 * k], rhs[2 * k + 1]
        out_vg[2 * k] = vQ
        out_vg[2 * k + 1] = vD
        vq = c * vQ + s * vD
        vd = c * vD - s * vQ
        iq = (ra * (E - vq) - Xdp * vd) / det
        id_ = (-ra * vd - Xqp * (E - vq)) / det
        psid = Xdp * id_ + E
        psiq = Xqp * iq
        out_pq[0, k] = id_
        out_pq[1, k] = psid * iq - psiq * id_
        out_pq[2, k] = vd * id_ + vq * iq
        out_pq[3, k] = vd * iq - vq * id_
    return True


@njit(cache=True)
def _rhs(x, Yr, mp, cp, gains, A, active, dx, vg, alg):
    n = mp.shape[1]
    if not _network(x, Yr, mp, vg, alg):
        return False
    kT, kP, kE, kk, ws = gains[0], gains[1], gains[2], gains[3], gains[4]
    gT = np.empty(n)
    gE = np.empty(n)
    for i in range(n):
        sT = x[3 * n + i]
        sE = x[4 * n + i]
        gT[i] = (1.0 - sT / cp[2, i]) * (1.0 + sT / cp[3, i])
        gE[i] = (1.0 - sE / cp[4, i]) * (1.0 + sE / cp[5, i])
    for i in range(n):
        slip = x[n + i] - mp[8, i]
        Tm = cp[0, i] + x[3 * n + i]
        Ef = cp[1, i] + x[4 * n + i]
        dx[i] = mp[7, i] * slip
        dx[n + i] = (Tm - alg[1, i] - mp[1, i] * slip) / (2.0 * mp[0, i])
        dx[2 * n + i] = (Ef - x[2 * n + i] + (mp[3, i] - mp[4, i]) * alg[0, i]) / mp[2, i]
        if active:
            cons_P = 0.0
            cons_Q = 0.0
            xP = cp[6, i] * alg[2, i]
            xQ = cp[7, i] * alg[3, i]
            for j in range(n):
                if A[i, j] != 0.0:
                    cons_P += (xP - cp[6, j] * alg[2, j]) * gT[j]
                    cons_Q += (xQ - cp[7, j] * alg[3, j]) * gE[j]
            dx[3 * n + i] = kT * gT[i] * (ws - x[n + i] - kP * cons_P) - kk * x[3 * n + i]
            dx[4 * n + i] = -kE * gE[i] * cons_Q - kk * x[4 * n + i]
        else:
            dx[3 * n + i] = 0.0
            dx[4 * n + i] = 0.0
    return True


@njit(cache=True)
def integrate(x0, step0, nsteps, dt, record_every, Yr, mp, cp, gains, A, active, tol,
              record_last, rec_x, rec_vg, rec_alg, rec_step):
    """Advance ``nsteps`` RK4 steps starting at global step ``step0``.

    Records after every step whose global index is a multiple of
    ``record_every``, and after the last step when ``record_last`` is set.  Returns
    ``(status, steps_done, records_written, x)``.
    """
    n = mp.shape[1]
    m = x0.size
    x = x0.copy()
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    vg = np.empty(2 * n)
    alg = np.empty((4, n))
    nrec = 0
    for step in range(nsteps):
        if not _rhs(x, Yr, mp, cp, gains, A, active, k1, vg, alg):
            return SINGULAR, step, nrec, x
        for j in range(m):
            tmp[j] = x[j] + 0.5 * dt * k1[j]
        if not _rhs(tmp, Yr, mp, cp, gains, A, active, k2, vg, alg):
            return SINGULAR, step, nrec, x
        for j in range(m):
            tmp[j] = x[j] + 0.5 * dt * k2[j]
        if not _rhs(tmp, Yr, mp, cp, gains, A, active, k3, vg, alg):
            return SINGULAR, step, nrec, x
        for j in range(m):
            tmp[j] = x[j] + dt * k3[j]
        if not _rhs(tmp, Yr, mp, cp, gains, A, active, k4, vg, alg):
            return SINGULAR, step, nrec, x
        for j in range(m):
            tmp[j] = x[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        for j in range(m):
            if not np.isfinite(tmp[j]):
                return NONFINITE, step, nrec, x
        for i in range(n):
            for off, row_hi, row_lo in ((3 * n, 2, 3), (4 * n, 4, 5)):
                s = tmp[off + i]
                hi = cp[row_hi, i]
                lo = -cp[row_lo, i]
                if s > hi:
                    if s - hi > tol:
                        return BOUND, step, nrec, tmp
                    tmp[off + i] = hi
                elif s < lo:
                    if lo - s > tol:
                        return BOUND, step, nrec, tmp
                    tmp[off + i] = lo
        for j in range(m):
            x[j] = tmp[j]
        g = step0 + step + 1
        if g % record_every == 0 or (record_last and step == nsteps - 1):
            if not _network(x, Yr, mp, vg, alg):
                return SINGULAR, step + 1, nrec, x
            rec_x[nrec, :] = x
            rec_vg[nrec, :] = vg
            rec_alg[nrec, :, :] = alg
            rec_step[nrec] = g
            nrec += 1
    return OK, nsteps, nrec, x


@njit(cache=True)
def derivative(x, Yr, mp, cp, gains, A, active):
    n = mp.shape[1]
    dx = np.empty(x.size)
    vg = np.empty(2 * n)
    alg = np.empty((4, n))
    ok = _rhs(x, Yr, mp, cp, gains, A, active, dx, vg, alg)
    return ok, dx, vg, alg
