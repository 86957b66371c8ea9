# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of the pure-numpy kernels in ``_ref``.

Same signatures and array conventions; plain C loops over the (small) joint
dimension and the (long) time dimension.  See ``_ref`` for the coefficient
array definitions.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt

cnp.import_array()

BACKEND = "compiled"


cdef inline void _phi_trig(double[:] theta, double[:] phi, double[:] cphi,
                           double[:] sphi, Py_ssize_t n) nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(n):
        acc += theta[i]
        phi[i] = acc
        cphi[i] = cos(acc)
        sphi[i] = sin(acc)


cdef void _mass(double[:, :] Z, double[:] Isuf, double[:] phi,
                double[:, :] M, Py_ssize_t n) nogil:
    # M[a, b] = sum_{k>=a, l>=b} Z[k, l] cos(phi_k - phi_l) + Isuf[max(a, b)]
    cdef Py_ssize_t a, b, k, l
    cdef double s
    for a in range(n):
        for b in range(a, n):
            s = 0.0
            for k in range(a, n):
                for l in range(b, n):
                    s += Z[k, l] * cos(phi[k] - phi[l])
            s += Isuf[a if a > b else b]
            M[a, b] = s
            M[b, a] = s


cdef void _dmass(double[:, :] Z, double[:] phi, double[:, :, :] dM,
                 Py_ssize_t n) nogil:
    # dM[a, b, e] = -sum_{k>=a, l>=b} Z[k, l] sin(phi_k - phi_l) (1{e<=k}-1{e<=l})
    cdef Py_ssize_t a, b, e, k, l
    cdef double s
    cdef int wk, wl
    for a in range(n):
        for b in range(n):
            for e in range(n):
                s = 0.0
                for k in range(a, n):
                    wk = 1 if e <= k else 0
                    for l in range(b, n):
                        wl = 1 if e <= l else 0
                        if wk != wl:
                            s -= Z[k, l] * sin(phi[k] - phi[l]) * (wk - wl)
                dM[a, b, e] = s


cdef void _coriolis_vec(double[:, :, :] dM, double[:] thd, double[:] out,
                        Py_ssize_t n) nogil:
    # out[a] = sum_{b,e} Gamma[a,b,e] thd_b thd_e with the Christoffel form
    cdef Py_ssize_t a, b, e
    cdef double s
    for a in range(n):
        s = 0.0
        for b in range(n):
            for e in range(n):
                s += 0.5 * (dM[a, b, e] + dM[a, e, b] - dM[b, e, a]) * thd[b] * thd[e]
        out[a] = s


cdef void _gravity(double[:] W, double g, double[:] cphi, double[:] out,
                   Py_ssize_t n) nogil:
    cdef Py_ssize_t a
    cdef double acc = 0.0
    for a in range(n - 1, -1, -1):
        acc += g * W[a] * cphi[a]
        out[a] = acc


cdef int _cholesky_solve(double[:, :] A, double[:] b, double[:] x,
                         double[:, :] L, Py_ssize_t n) nogil:
    # solve A x = b for SPD A via Cholesky; returns nonzero on breakdown
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(n):
        for j in range(i + 1):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= 0.0:
                    return 1
                L[i, i] = sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * x[k]
        x[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]
    return 0


def mass_matrix(Z, Isuf, theta):
    cdef double[:, :] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef double[:] Iv = np.ascontiguousarray(Isuf, dtype=np.float64)
    cdef double[:] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef Py_ssize_t n = Zv.shape[0]
    out = np.empty((n, n))
    cdef double[:, :] M = out
    buf = np.empty((3, n))
    cdef double[:] phi = buf[0], cphi = buf[1], sphi = buf[2]
    _phi_trig(th, phi, cphi, sphi, n)
    _mass(Zv, Iv, phi, M, n)
    return out


def coriolis_matrix(Z, theta, theta_dot):
    cdef double[:, :] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef double[:] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef double[:] thd = np.ascontiguousarray(theta_dot, dtype=np.float64)
    cdef Py_ssize_t n = Zv.shape[0]
    cdef Py_ssize_t a, b, e
    buf = np.empty((3, n))
    cdef double[:] phi = buf[0], cphi = buf[1], sphi = buf[2]
    _phi_trig(th, phi, cphi, sphi, n)
    dm = np.empty((n, n, n))
    cdef double[:, :, :] dM = dm
    _dmass(Zv, phi, dM, n)
    out = np.zeros((n, n))
    cdef double[:, :] C = out
    for a in range(n):
        for b in range(n):
            for e in range(n):
                C[a, b] += 0.5 * (dM[a, b, e] + dM[a, e, b] - dM[b, e, a]) * thd[e]
    return out


def gravity_vector(W, g, theta):
    cdef double[:] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef double[:] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef Py_ssize_t n = Wv.shape[0]
    buf = np.empty((3, n))
    cdef double[:] phi = buf[0], cphi = buf[1], sphi = buf[2]
    _phi_trig(th, phi, cphi, sphi, n)
    out = np.empty(n)
    cdef double[:] G = out
    _gravity(Wv, float(g), cphi, G, n)
    return out


def mcg(Z, W, Isuf, g, theta, theta_dot):
    return (mass_matrix(Z, Isuf, theta),
            coriolis_matrix(Z, theta, theta_dot),
            gravity_vector(W, g, theta))


def potential_energy(W, g, theta):
    phi = np.cumsum(np.asarray(theta, dtype=np.float64))
    return float(g) * float(np.dot(np.asarray(W, dtype=np.float64), np.sin(phi)))


def kinetic_energy(Z, Isuf, theta, theta_dot):
    M = mass_matrix(Z, Isuf, theta)
    thd = np.asarray(theta_dot, dtype=np.float64)
    return 0.5 * float(thd @ M @ thd)


def inverse_dynamics_batch(Z, W, Isuf, g, TH, THD, THDD):
    cdef double[:, :] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef double[:] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef double[:] Iv = np.ascontiguousarray(Isuf, dtype=np.float64)
    cdef double gg = float(g)
    TH2 = np.atleast_2d(np.ascontiguousarray(TH, dtype=np.float64))
    THD2 = np.atleast_2d(np.ascontiguousarray(THD, dtype=np.float64))
    THDD2 = np.atleast_2d(np.ascontiguousarray(THDD, dtype=np.float64))
    cdef double[:, :] th = TH2, thd = THD2, thdd = THDD2
    cdef Py_ssize_t nt = th.shape[0], n = th.shape[1]
    out = np.empty((nt, n))
    cdef double[:, :] tau = out
    buf = np.empty((3, n))
    cdef double[:] phi = buf[0], cphi = buf[1], sphi = buf[2]
    mm = np.empty((n, n))
    cdef double[:, :] M = mm
    dm = np.empty((n, n, n))
    cdef double[:, :, :] dM = dm
    scratch = np.empty((2, n))
    cdef double[:] cvec = scratch[0], G = scratch[1]
    cdef Py_ssize_t t, a, b
    cdef double s
    for t in range(nt):
        _phi_trig(th[t], phi, cphi, sphi, n)
        _mass(Zv, Iv, phi, M, n)
        _dmass(Zv, phi, dM, n)
        _coriolis_vec(dM, thd[t], cvec, n)
        _gravity(Wv, gg, cphi, G, n)
        for a in range(n):
            s = cvec[a] + G[a]
            for b in range(n):
                s += M[a, b] * thdd[t, b]
            tau[t, a] = s
    return out


def mass_diag_batch(Z, Isuf, TH):
    cdef double[:, :] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef double[:] Iv = np.ascontiguousarray(Isuf, dtype=np.float64)
    TH2 = np.atleast_2d(np.ascontiguousarray(TH, dtype=np.float64))
    cdef double[:, :] th = TH2
    cdef Py_ssize_t nt = th.shape[0], n = th.shape[1]
    out = np.empty((nt, n))
    cdef double[:, :] diag = out
    buf = np.empty((3, n))
    cdef double[:] phi = buf[0], cphi = buf[1], sphi = buf[2]
    cdef Py_ssize_t t, a, k, l
    cdef double s
    for t in range(nt):
        _phi_trig(th[t], phi, cphi, sphi, n)
        for a in range(n):
            s = Iv[a]
            for k in range(a, n):
                for l in range(a, n):
                    s += Zv[k, l] * cos(phi[k] - phi[l])
            diag[t, a] = s
    return out


cdef int _accel(double[:, :] Zv, double[:] Wv, double[:] Iv, double gg,
                double[:] th, double[:] thd, double[:] tau_in,
                double[:] phi, double[:] cphi, double[:] sphi,
                double[:, :] M, double[:, :, :] dM, double[:] cvec,
                double[:] G, double[:] rhs, double[:, :] L, double[:] out,
                Py_ssize_t n) nogil:
    cdef Py_ssize_t a, b
    _phi_trig(th, phi, cphi, sphi, n)
    _mass(Zv, Iv, phi, M, n)
    _dmass(Zv, phi, dM, n)
    _coriolis_vec(dM, thd, cvec, n)
    _gravity(Wv, gg, cphi, G, n)
    for a in range(n):
        rhs[a] = tau_in[a] - cvec[a] - G[a]
    return _cholesky_solve(M, rhs, out, L, n)


def rk4_chain_table(Z, W, Isuf, g, t_grid, tau_grid, theta0, thetad0):
    cdef double[:, :] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef double[:] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef double[:] Iv = np.ascontiguousarray(Isuf, dtype=np.float64)
    cdef double gg = float(g)
    cdef double[:] tg = np.ascontiguousarray(t_grid, dtype=np.float64)
    cdef double[:, :] taug = np.ascontiguousarray(tau_grid, dtype=np.float64)
    cdef Py_ssize_t nt = tg.shape[0]
    cdef Py_ssize_t n = taug.shape[1]
    TH = np.empty((nt, n)); THD = np.empty((nt, n)); THDD = np.empty((nt, n))
    cdef double[:, :] THv = TH, THDv = THD, THDDv = THDD
    work = np.empty((14, n))
    cdef double[:] phi = work[0], cphi = work[1], sphi = work[2]
    cdef double[:] cvec = work[3], G = work[4], rhs = work[5]
    cdef double[:] th = work[6], thd = work[7], tmp_th = work[8], tmp_thd = work[9]
    cdef double[:] k1 = work[10], k2 = work[11], k3 = work[12], k4 = work[13]
    tau_buf = np.empty((3, n))
    cdef double[:] tau0 = tau_buf[0], taum = tau_buf[1], tau1 = tau_buf[2]
    mm = np.empty((n, n)); Lm = np.empty((n, n))
    cdef double[:, :] M = mm, L = Lm
    dm = np.empty((n, n, n))
    cdef double[:, :, :] dM = dm
    cdef double[:] th0v = np.ascontiguousarray(theta0, dtype=np.float64)
    cdef double[:] thd0v = np.ascontiguousarray(thetad0, dtype=np.float64)
    cdef Py_ssize_t i, a
    cdef double h
    cdef int bad = 0

    for a in range(n):
        th[a] = th0v[a]
        thd[a] = thd0v[a]
        THv[0, a] = th[a]
        THDv[0, a] = thd[a]
    for a in range(n):
        tau0[a] = taug[0, a]
    bad |= _accel(Zv, Wv, Iv, gg, th, thd, tau0, phi, cphi, sphi, M, dM,
                  cvec, G, rhs, L, k1, n)
    for a in range(n):
        THDDv[0, a] = k1[a]

    for i in range(nt - 1):
        h = tg[i + 1] - tg[i]
        for a in range(n):
            tau0[a] = taug[i, a]
            tau1[a] = taug[i + 1, a]
            taum[a] = 0.5 * (tau0[a] + tau1[a])
        bad |= _accel(Zv, Wv, Iv, gg, th, thd, tau0, phi, cphi, sphi, M, dM,
                      cvec, G, rhs, L, k1, n)
        for a in range(n):
            tmp_th[a] = th[a] + 0.5 * h * thd[a]
            tmp_thd[a] = thd[a] + 0.5 * h * k1[a]
        bad |= _accel(Zv, Wv, Iv, gg, tmp_th, tmp_thd, taum, phi, cphi, sphi,
                      M, dM, cvec, G, rhs, L, k2, n)
        for a in range(n):
            tmp_th[a] = th[a] + 0.5 * h * (thd[a] + 0.5 * h * k1[a])
            tmp_thd[a] = thd[a] + 0.5 * h * k2[a]
        bad |= _accel(Zv, Wv, Iv, gg, tmp_th, tmp_thd, taum, phi, cphi, sphi,
                      M, dM, cvec, G, rhs, L, k3, n)
        for a in range(n):
            tmp_th[a] = th[a] + h * (thd[a] + 0.5 * h * k2[a])
            tmp_thd[a] = thd[a] + h * k3[a]
        bad |= _accel(Zv, Wv, Iv, gg, tmp_th, tmp_thd, tau1, phi, cphi, sphi,
                      M, dM, cvec, G, rhs, L, k4, n)
        for a in range(n):
            th[a] += (h / 6.0) * (thd[a] + 2.0 * (thd[a] + 0.5 * h * k1[a])
                                   + 2.0 * (thd[a] + 0.5 * h * k2[a])
                                   + (thd[a] + h * k3[a]))
            thd[a] += (h / 6.0) * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a])
            THv[i + 1, a] = th[a]
            THDv[i + 1, a] = thd[a]
        bad |= _accel(Zv, Wv, Iv, gg, th, thd, tau1, phi, cphi, sphi, M, dM,
                      cvec, G, rhs, L, k1, n)
        for a in range(n):
            THDDv[i + 1, a] = k1[a]
    if bad:
        raise FloatingPointError("inertia matrix lost positive definiteness")
    return TH, THD, THDD


def rk4_compliance(double B, double D, double K, t_grid, taupr_grid,
                   double d0, double dd0):
    cdef double[:] tg = np.ascontiguousarray(t_grid, dtype=np.float64)
    cdef double[:] taug = np.ascontiguousarray(taupr_grid, dtype=np.float64)
    cdef Py_ssize_t nt = tg.shape[0]
    X = np.empty(nt); XD = np.empty(nt); XDD = np.empty(nt)
    cdef double[:] Xv = X, XDv = XD, XDDv = XDD
    cdef double inv_b = 1.0 / B
    cdef double x = d0, xd = dd0
    cdef double h, ta, tb, tm
    cdef double k1v, k2v, k3v, k4v, k1x, k2x, k3x, k4x
    cdef Py_ssize_t i
    Xv[0] = x
    XDv[0] = xd
    XDDv[0] = inv_b * (taug[0] - D * xd - K * x)
    for i in range(nt - 1):
        h = tg[i + 1] - tg[i]
        ta = taug[i]
        tb = taug[i + 1]
        tm = 0.5 * (ta + tb)
        k1v = inv_b * (ta - D * xd - K * x)
        k1x = xd
        k2v = inv_b * (tm - D * (xd + 0.5 * h * k1v) - K * (x + 0.5 * h * k1x))
        k2x = xd + 0.5 * h * k1v
        k3v = inv_b * (tm - D * (xd + 0.5 * h * k2v) - K * (x + 0.5 * h * k2x))
        k3x = xd + 0.5 * h * k2v
        k4v = inv_b * (tb - D * (xd + h * k3v) - K * (x + h * k3x))
        k4x = xd + h * k3v
        x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        xd += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        Xv[i + 1] = x
        XDv[i + 1] = xd
        XDDv[i + 1] = inv_b * (taug[i + 1] - D * xd - K * x)
    return X, XD, XDD
