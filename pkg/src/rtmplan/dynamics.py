"""Rigid-body dynamics of planar serial chains with active/passive partitions.

Conventions: joint angles are relative, the zero configuration lays every
link along +x, gravity pulls along -y.  A chain is described per link by
length, mass, center-of-mass offset from the proximal joint, and rotational
inertia about the center of mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import IntegrationError


def _as_vector(x, n, name):
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.size == 1 and n > 1:
        v = np.full(n, v[0])
    if v.size != n:
        raise ValueError(f"{name} must have length {n}, got {v.size}")
    return v


@dataclass(frozen=True)
class ChainModel:
    """Geometry, inertia and limits of an N-joint planar serial chain."""

    lengths: np.ndarray
    masses: np.ndarray
    com_offsets: np.ndarray
    inertias: np.ndarray
    gravity: float = 9.81
    theta_min: np.ndarray | None = None
    theta_max: np.ndarray | None = None
    tau_min: np.ndarray | None = None
    tau_max: np.ndarray | None = None
    power_min: np.ndarray | None = None
    power_max: np.ndarray | None = None
    power_sys: float = np.inf

    # precomputed coefficient arrays for the kernels
    _Z: np.ndarray = field(init=False, repr=False, compare=False)
    _W: np.ndarray = field(init=False, repr=False, compare=False)
    _Isuf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(np.atleast_1d(self.lengths))
        if n < 1:
            raise ValueError("chain needs at least one joint")
        for name in ("lengths", "masses", "com_offsets", "inertias"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), n, name))
        L, m, r, inertia = self.lengths, self.masses, self.com_offsets, self.inertias
        if np.any(L <= 0) or np.any(m <= 0) or np.any(inertia <= 0):
            raise ValueError("lengths, masses and inertias must be strictly positive")
        if np.any(r < 0) or np.any(r > L):
            raise ValueError("com offsets must lie within [0, length]")
        lim = {
            "theta_min": -np.inf, "theta_max": np.inf,
            "tau_min": -np.inf, "tau_max": np.inf,
            "power_min": -np.inf, "power_max": np.inf,
        }
        for name, default in lim.items():
            val = getattr(self, name)
            vec = np.full(n, default) if val is None else _as_vector(val, n, name)
            object.__setattr__(self, name, vec)
        if np.any(self.theta_min >= self.theta_max) or np.any(self.tau_min >= self.tau_max):
            raise ValueError("lower limits must lie strictly below upper limits")
        if not self.power_sys > 0:
            raise ValueError("power_sys must be positive")

        # c[i, k] = L_k for k < i, r_i for k = i (zero above the diagonal)
        c = np.zeros((n, n))
        for i in range(n):
            c[i, :i] = L[:i]
            c[i, i] = r[i]
        Z = np.zeros((n, n))
        for k in range(n):
            for l_ in range(n):
                i0 = max(k, l_)
                Z[k, l_] = float(np.sum(m[i0:] * c[i0:, k] * c[i0:, l_]))
        W = np.array([float(np.sum(m[k:] * c[k:, k])) for k in range(n)])
        Isuf = np.cumsum(inertia[::-1])[::-1]
        object.__setattr__(self, "_Z", Z)
        object.__setattr__(self, "_W", W)
        object.__setattr__(self, "_Isuf", Isuf)

    @property
    def n_joints(self) -> int:
        return len(self.lengths)

    def permuted(self, order: Sequence[int]) -> "ChainModel":
        """Relabel joints (the chain topology itself is ordered base-out)."""
        idx = np.asarray(order)
        return ChainModel(
            self.lengths[idx], self.masses[idx], self.com_offsets[idx],
            self.inertias[idx], self.gravity,
            self.theta_min[idx], self.theta_max[idx],
            self.tau_min[idx], self.tau_max[idx],
            self.power_min[idx], self.power_max[idx], self.power_sys,
        )


@dataclass
class JointState:
    """Joint positions, velocities and (optionally) accelerations."""

    theta: np.ndarray
    theta_dot: np.ndarray
    theta_ddot: np.ndarray | None = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        self.theta_dot = np.asarray(self.theta_dot, dtype=float).reshape(-1)
        if self.theta_dot.size != self.theta.size:
            raise ValueError("theta and theta_dot must have equal length")
        if self.theta_ddot is not None:
            self.theta_ddot = np.asarray(self.theta_ddot, dtype=float).reshape(-1)
            if self.theta_ddot.size != self.theta.size:
                raise ValueError("theta_ddot must match theta length")
        arrays = [self.theta, self.theta_dot]
        if self.theta_ddot is not None:
            arrays.append(self.theta_ddot)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("joint state entries must be finite")


@dataclass
class ComplianceParams:
    """Virtual inertia / damping / stiffness of passive joints.

    One scalar triple per joint; entries for joints that never go passive are
    ignored.  The reference trajectory defaults to a frozen hold (position at
    the switch instant, zero velocity).
    """

    inertia: np.ndarray
    damping: np.ndarray
    stiffness: np.ndarray
    theta_ref: Callable[[float], np.ndarray] | None = None
    theta_dot_ref: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        self.inertia = np.atleast_1d(np.asarray(self.inertia, dtype=float))
        n = self.inertia.size
        self.damping = _as_vector(self.damping, n, "damping")
        self.stiffness = _as_vector(self.stiffness, n, "stiffness")
        if np.any(self.inertia <= 0):
            raise ValueError("compliance inertia must be strictly positive")
        if np.any(self.damping < 0) or np.any(self.stiffness < 0):
            raise ValueError("damping and stiffness must be non-negative")


@dataclass
class Trajectory:
    """Time-gridded joint motion with torques and per-joint mode labels.

    The grid is uniform at step ``dt`` augmented with the exact switch
    instants of the governing schedule.
    """

    t: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    theta_ddot: np.ndarray
    tau: np.ndarray
    modes: np.ndarray  # (nt, N) single characters 'A' / 'P' / 'T'
    dt: float
    switch_times: tuple = ()

    @property
    def n_joints(self) -> int:
        return self.theta.shape[1]

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def window(self, t0: float, t1: float) -> "Trajectory":
        """Sub-trajectory covering grid points in [t0, t1]."""
        keep = (self.t >= t0 - 1e-12) & (self.t <= t1 + 1e-12)
        return Trajectory(
            self.t[keep], self.theta[keep], self.theta_dot[keep],
            self.theta_ddot[keep], self.tau[keep], self.modes[keep],
            self.dt, self.switch_times,
        )

    def state_at_index(self, i: int) -> JointState:
        return JointState(self.theta[i], self.theta_dot[i], self.theta_ddot[i])

    def power(self) -> np.ndarray:
        """Total instantaneous power sum_i |tau_i * thetadot_i| per grid point."""
        return np.sum(np.abs(self.tau * self.theta_dot), axis=1)


# ---------------------------------------------------------------------------
# operations


def _check_theta(model, theta):
    th = np.asarray(theta, dtype=float).reshape(-1)
    if th.size != model.n_joints:
        raise ValueError(f"theta must have length {model.n_joints}")
    if not np.all(np.isfinite(th)):
        raise ValueError("theta entries must be finite")
    return th


def mass_matrix(model: ChainModel, theta) -> np.ndarray:
    """Symmetric positive-definite joint-space inertia matrix."""
    th = _check_theta(model, theta)
    return kernels.mass_matrix(model._Z, model._Isuf, th)


def coriolis_matrix(model: ChainModel, theta, theta_dot) -> np.ndarray:
    """Coriolis/centrifugal matrix built from Christoffel symbols of M."""
    th = _check_theta(model, theta)
    thd = _as_vector(theta_dot, model.n_joints, "theta_dot")
    return kernels.coriolis_matrix(model._Z, th, thd)


def gravity_vector(model: ChainModel, theta) -> np.ndarray:
    th = _check_theta(model, theta)
    return kernels.gravity_vector(model._W, model.gravity, th)


def forward_dynamics(model: ChainModel, state: JointState, tau, tau_contact=None) -> np.ndarray:
    """Accelerations from applied plus contact torques."""
    n = model.n_joints
    tau = _as_vector(tau, n, "tau")
    tc = np.zeros(n) if tau_contact is None else _as_vector(tau_contact, n, "tau_contact")
    M, C, G = kernels.mcg(model._Z, model._W, model._Isuf, model.gravity,
                          _check_theta(model, state.theta),
                          _as_vector(state.theta_dot, n, "theta_dot"))
    return np.linalg.solve(M, tau + tc - C @ state.theta_dot - G)


def inverse_dynamics(model: ChainModel, state: JointState) -> np.ndarray:
    """Torques reproducing the given accelerations."""
    if state.theta_ddot is None:
        raise ValueError("inverse dynamics needs theta_ddot")
    tau = kernels.inverse_dynamics_batch(
        model._Z, model._W, model._Isuf, model.gravity,
        state.theta[None, :], state.theta_dot[None, :], state.theta_ddot[None, :])
    return tau[0]


def inverse_dynamics_batch(model: ChainModel, TH, THD, THDD) -> np.ndarray:
    return kernels.inverse_dynamics_batch(
        model._Z, model._W, model._Isuf, model.gravity, TH, THD, THDD)


def compliant_response(params: ComplianceParams, dtheta, dtheta_dot, tau_pr) -> np.ndarray:
    """Deviation acceleration of the inertia-damping-spring response."""
    n = params.inertia.size
    d = _as_vector(dtheta, n, "dtheta")
    dd = _as_vector(dtheta_dot, n, "dtheta_dot")
    tp = _as_vector(tau_pr, n, "tau_pr")
    return (tp - params.damping * dd - params.stiffness * d) / params.inertia


def total_power(tau, theta_dot) -> float:
    """sum_i |tau_i * thetadot_i|."""
    tau = np.asarray(tau, dtype=float)
    thd = np.asarray(theta_dot, dtype=float)
    if tau.shape != thd.shape:
        raise ValueError("tau and theta_dot must have equal shape")
    return float(np.sum(np.abs(tau * thd)))


def total_energy(model: ChainModel, theta, theta_dot) -> float:
    th = _check_theta(model, theta)
    thd = _as_vector(theta_dot, model.n_joints, "theta_dot")
    return (kernels.kinetic_energy(model._Z, model._Isuf, th, thd)
            + kernels.potential_energy(model._W, model.gravity, th))


def build_grid(t0: float, t1: float, dt: float, events=()) -> np.ndarray:
    """Uniform grid on [t0, t1] with the event times inserted exactly.

    Points closer than 1e-12 to an event collapse onto the event value, so
    every event appears exactly once.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = int(np.ceil((t1 - t0) / dt - 1e-9))
    base = t0 + dt * np.arange(n + 1)
    base[-1] = t1
    ev = np.asarray([e for e in events if t0 < e < t1], dtype=float)
    if ev.size:
        keep = np.ones(base.size, dtype=bool)
        for e in ev:
            keep &= np.abs(base - e) > 1e-12
        base = np.concatenate([base[keep], ev])
        base.sort()
    return base


def integrate(model: ChainModel, control_law, t_span, dt, switch_times=(),
              x0: JointState | None = None, mode_fn=None,
              tau_contact_fn=None) -> Trajectory:
    """Fixed-step RK4 of the chain under a torque control law.

    ``control_law(t, state, modes) -> tau`` is queried at every stage; step
    boundaries align exactly with each switch time (the final substep of a
    segment is shortened as needed).  ``mode_fn(t) -> per-joint labels`` is
    optional and defaults to all-active labels.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    grid = build_grid(t0, t1, dt, switch_times)
    n = model.n_joints
    if x0 is None:
        x0 = JointState(np.zeros(n), np.zeros(n))
    th = x0.theta.copy()
    thd = x0.theta_dot.copy()

    nt = grid.size
    TH = np.empty((nt, n))
    THD = np.empty((nt, n))
    THDD = np.empty((nt, n))
    TAU = np.empty((nt, n))
    MODES = np.empty((nt, n), dtype="<U1")

    def modes_at(t):
        if mode_fn is None:
            return ("A",) * n
        return mode_fn(t)

    def accel(t, th_, thd_):
        state = JointState(th_, thd_)
        tau = np.asarray(control_law(t, state, modes_at(t)), dtype=float)
        if not np.all(np.isfinite(tau)):
            raise IntegrationError(f"control law returned non-finite torque at t={t:.6f}", t=t)
        tc = None if tau_contact_fn is None else tau_contact_fn(t)
        return tau, forward_dynamics(model, state, tau, tc)

    TH[0], THD[0] = th, thd
    TAU[0], THDD[0] = accel(grid[0], th, thd)
    MODES[0] = modes_at(grid[0])
    for i in range(nt - 1):
        t = grid[i]
        h = grid[i + 1] - t
        _, k1v = accel(t, th, thd)
        k1x = thd
        _, k2v = accel(t + 0.5 * h, th + 0.5 * h * k1x, thd + 0.5 * h * k1v)
        k2x = thd + 0.5 * h * k1v
        _, k3v = accel(t + 0.5 * h, th + 0.5 * h * k2x, thd + 0.5 * h * k2v)
        k3x = thd + 0.5 * h * k2v
        _, k4v = accel(t + h, th + h * k3x, thd + h * k3v)
        k4x = thd + h * k3v
        th = th + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        thd = thd + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        TH[i + 1], THD[i + 1] = th, thd
        TAU[i + 1], THDD[i + 1] = accel(grid[i + 1], th, thd)
        MODES[i + 1] = modes_at(grid[i + 1])

    return Trajectory(grid, TH, THD, THDD, TAU, MODES, dt,
                      tuple(float(s) for s in switch_times))
