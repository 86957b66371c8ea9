"""Pure-numpy reference implementation of the hot kernels.

Same signatures as the compiled backend in ``_core.pyx``.  All functions take
the chain's precomputed coefficient arrays rather than a model object so the
compiled twin can stay free of Python attribute access:

    Z[k, l]   = sum_{i >= max(k,l)} m_i * c_{ik} * c_{il}
    W[k]      = sum_{i >= k} m_i * c_{ik}
    Isuf[k]   = sum_{i >= k} I_i

with c_{ik} = L_k for k < i and c_{ii} = r_i the center-of-mass offset.
Joint angles are relative; the zero configuration points every link along +x
and gravity acts along -y.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def mass_matrix(Z, Isuf, theta):
    """Joint-space inertia matrix, (N, N)."""
    n = Z.shape[0]
    phi = np.cumsum(theta)
    cosd = np.cos(phi[:, None] - phi[None, :])
    # M[a, b] = sum_{k>=a, l>=b} Z[k, l] cos(phi_k - phi_l) + sum_{i>=max(a,b)} I_i
    M = _suffix2(Z * cosd)
    idx = np.maximum(np.arange(n)[:, None], np.arange(n)[None, :])
    return M + Isuf[idx]


def _suffix2(x):
    """sum_{k>=a, l>=b} x[k, l] for every (a, b)."""
    return np.cumsum(np.cumsum(x[::-1, ::-1], axis=0), axis=1)[::-1, ::-1]


def _dmass(Z, theta):
    """dM[a, b, e] = d M[a, b] / d theta[e]."""
    n = Z.shape[0]
    phi = np.cumsum(theta)
    sind = np.sin(phi[:, None] - phi[None, :])
    k = np.arange(n)
    # P[k, l, e] = 1{e <= k} - 1{e <= l}
    below = (k[None, :] >= k[:, None]).astype(float)  # below[e, k] = 1{e <= k}
    y = -Z * sind
    dM = np.empty((n, n, n))
    for e in range(n):
        dM[:, :, e] = _suffix2(y * (below[e][:, None] - below[e][None, :]))
    return dM


def coriolis_matrix(Z, theta, theta_dot):
    """Coriolis/centrifugal matrix from Christoffel symbols of M."""
    dM = _dmass(Z, theta)
    # Gamma[a, b, e] = 0.5 * (dM[a,b,e] + dM[a,e,b] - dM[b,e,a])
    gamma = 0.5 * (dM + dM.transpose(0, 2, 1) - dM.transpose(2, 1, 0))
    return gamma @ theta_dot


def gravity_vector(W, g, theta):
    phi = np.cumsum(theta)
    wk = g * W * np.cos(phi)
    return np.cumsum(wk[::-1])[::-1]


def mcg(Z, W, Isuf, g, theta, theta_dot):
    """Mass matrix, Coriolis matrix and gravity vector in one call."""
    return (
        mass_matrix(Z, Isuf, theta),
        coriolis_matrix(Z, theta, theta_dot),
        gravity_vector(W, g, theta),
    )


def potential_energy(W, g, theta):
    phi = np.cumsum(theta)
    return g * float(np.dot(W, np.sin(phi)))


def kinetic_energy(Z, Isuf, theta, theta_dot):
    M = mass_matrix(Z, Isuf, theta)
    return 0.5 * float(theta_dot @ M @ theta_dot)


def inverse_dynamics_batch(Z, W, Isuf, g, TH, THD, THDD):
    """tau[i] = M(theta_i) thdd_i + C(theta_i, thd_i) thd_i + G(theta_i).

    Vectorized over the leading (time) axis.
    """
    TH = np.atleast_2d(TH)
    THD = np.atleast_2d(THD)
    THDD = np.atleast_2d(THDD)
    nt, n = TH.shape
    phi = np.cumsum(TH, axis=1)
    diff = phi[:, :, None] - phi[:, None, :]
    cosd = np.cos(diff)
    sind = np.sin(diff)

    zk = Z[None, :, :] * cosd
    M = _suffix2_batch(zk)
    idx = np.maximum(np.arange(n)[:, None], np.arange(n)[None, :])
    M = M + Isuf[idx][None, :, :]

    y = -Z[None, :, :] * sind
    k = np.arange(n)
    below = (k[None, :] >= k[:, None]).astype(float)
    dM = np.empty((nt, n, n, n))
    for e in range(n):
        dM[:, :, :, e] = _suffix2_batch(y * (below[e][:, None] - below[e][None, :]))
    gamma = 0.5 * (dM + dM.transpose(0, 1, 3, 2) - dM.transpose(0, 3, 2, 1))
    cvec = np.einsum("tabe,tb,te->ta", gamma, THD, THD)

    wk = g * W[None, :] * np.cos(phi)
    G = np.cumsum(wk[:, ::-1], axis=1)[:, ::-1]

    tau = np.einsum("tab,tb->ta", M, THDD) + cvec + G
    return tau


def _suffix2_batch(x):
    return np.cumsum(np.cumsum(x[:, ::-1, ::-1], axis=1), axis=2)[:, ::-1, ::-1]


def mass_diag_batch(Z, Isuf, TH):
    """M[k, k] along a trajectory, (nt, N)."""
    TH = np.atleast_2d(TH)
    nt, n = TH.shape
    phi = np.cumsum(TH, axis=1)
    cosd = np.cos(phi[:, :, None] - phi[:, None, :])
    M = _suffix2_batch(Z[None, :, :] * cosd)
    diag = M[:, np.arange(n), np.arange(n)] + Isuf[np.arange(n)]
    return diag


def _accel(Z, W, Isuf, g, theta, theta_dot, tau):
    M = mass_matrix(Z, Isuf, theta)
    c = coriolis_matrix(Z, theta, theta_dot) @ theta_dot
    G = gravity_vector(W, g, theta)
    return np.linalg.solve(M, tau - c - G)


def rk4_chain_table(Z, W, Isuf, g, t_grid, tau_grid, theta0, thetad0):
    """Fixed-step RK4 of the full chain driven by a torque table.

    The torque is interpolated linearly between grid points; steps span
    consecutive grid entries (the grid already carries any event times).
    Returns (TH, THD, THDD) sampled on the grid.
    """
    nt = len(t_grid)
    n = len(theta0)
    TH = np.empty((nt, n))
    THD = np.empty((nt, n))
    THDD = np.empty((nt, n))
    th = np.array(theta0, dtype=float)
    thd = np.array(thetad0, dtype=float)
    TH[0] = th
    THD[0] = thd

    def tau_at(i, frac):
        if frac == 0.0:
            return tau_grid[i]
        return (1.0 - frac) * tau_grid[i] + frac * tau_grid[i + 1]

    THDD[0] = _accel(Z, W, Isuf, g, th, thd, tau_at(0, 0.0))
    for i in range(nt - 1):
        h = t_grid[i + 1] - t_grid[i]
        t0 = tau_at(i, 0.0)
        tm = tau_at(i, 0.5)
        t1 = tau_at(i, 1.0)
        k1v = _accel(Z, W, Isuf, g, th, thd, t0)
        k1x = thd
        k2v = _accel(Z, W, Isuf, g, th + 0.5 * h * k1x, thd + 0.5 * h * k1v, tm)
        k2x = thd + 0.5 * h * k1v
        k3v = _accel(Z, W, Isuf, g, th + 0.5 * h * k2x, thd + 0.5 * h * k2v, tm)
        k3x = thd + 0.5 * h * k2v
        k4v = _accel(Z, W, Isuf, g, th + h * k3x, thd + h * k3v, t1)
        k4x = thd + h * k3v
        th = th + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        thd = thd + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        TH[i + 1] = th
        THD[i + 1] = thd
        THDD[i + 1] = _accel(Z, W, Isuf, g, th, thd, t1)
    return TH, THD, THDD


def rk4_compliance(B, D, K, t_grid, taupr_grid, d0, dd0):
    """RK4 of the scalar deviation oscillator B*x'' + D*x' + K*x = tau(t).

    tau is interpolated linearly between grid points.  Returns the deviation,
    its rate and its acceleration on the grid.
    """
    nt = len(t_grid)
    X = np.empty(nt)
    XD = np.empty(nt)
    XDD = np.empty(nt)
    x = float(d0)
    xd = float(dd0)
    X[0] = x
    XD[0] = xd
    inv_b = 1.0 / B

    def f(xv, xdv, tau):
        return inv_b * (tau - D * xdv - K * xv)

    XDD[0] = f(x, xd, taupr_grid[0])
    for i in range(nt - 1):
        h = t_grid[i + 1] - t_grid[i]
        ta = taupr_grid[i]
        tb = taupr_grid[i + 1]
        tm = 0.5 * (ta + tb)
        k1v = f(x, xd, ta)
        k1x = xd
        k2v = f(x + 0.5 * h * k1x, xd + 0.5 * h * k1v, tm)
        k2x = xd + 0.5 * h * k1v
        k3v = f(x + 0.5 * h * k2x, xd + 0.5 * h * k2v, tm)
        k3x = xd + 0.5 * h * k2v
        k4v = f(x + h * k3x, xd + h * k3v, tb)
        k4x = xd + h * k3v
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        xd = xd + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        X[i + 1] = x
        XD[i + 1] = xd
        XDD[i + 1] = f(x, xd, tb)
    return X, XD, XDD
