"""Mode-dependent running costs and the throwing-task objective.

The per-joint running cost is ``k_u * int u^2 - k_v * int thd^2 -
k_a * int thdd^2`` with the double-integrator control u identified with the
joint acceleration.  The negative terms make the integrand unbounded on its
own; boundedness comes from the control and state limits enforced by the
segment solver, never from this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ChainModel, JointState, Trajectory
from .schedule import JointMode

_trapz = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class CostWeights:
    k_u: float
    k_v: float
    k_a: float

    def __post_init__(self):
        vals = (self.k_u, self.k_v, self.k_a)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("cost weights must be finite")
        if self.k_u <= 0:
            raise ValueError("k_u must be strictly positive in every mode")
        if self.k_v < 0 or self.k_a < 0:
            raise ValueError("k_v and k_a must be non-negative")

    def blended(self, other: "CostWeights", frac: float) -> "CostWeights":
        f = min(max(frac, 0.0), 1.0)
        return CostWeights(
            (1 - f) * self.k_u + f * other.k_u,
            (1 - f) * self.k_v + f * other.k_v,
            (1 - f) * self.k_a + f * other.k_a,
        )


#: repo defaults; scenarios override these in their config tables.
DEFAULT_WEIGHTS = {
    JointMode.ACTIVE: CostWeights(1.0, 4.0, 1.0),
    JointMode.PASSIVE: CostWeights(5.0, 0.1, 0.1),
}


def weights_for_mode(mode: JointMode, table=None, frac: float = 0.5,
                     neighbors=None) -> CostWeights:
    """Weight triple for a mode; Transition blends its neighboring modes.

    ``frac`` is the position inside the blend window (0 at entry, 1 at exit)
    and ``neighbors`` the (from, to) modes; they default to the midpoint of
    Active and Passive.
    """
    table = dict(DEFAULT_WEIGHTS) if table is None else table
    if mode is not JointMode.TRANSITION:
        return table[mode]
    if JointMode.TRANSITION in table and neighbors is None:
        return table[JointMode.TRANSITION]
    a, b = neighbors if neighbors is not None else (JointMode.ACTIVE, JointMode.PASSIVE)
    return table[a].blended(table[b], frac)


def running_cost(weights: CostWeights, t, u, theta_dot, theta_ddot=None) -> float:
    """Trapezoidal quadrature of the mode cost over a time grid."""
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(theta_dot, dtype=float)
    a = u if theta_ddot is None else np.asarray(theta_ddot, dtype=float)
    if t.size == 0:
        raise ValueError("segment is empty")
    return float(
        weights.k_u * _trapz(u * u, t)
        - weights.k_v * _trapz(v * v, t)
        - weights.k_a * _trapz(a * a, t)
    )


def segment_cost(weights: CostWeights, segment: Trajectory, joint: int) -> float:
    """Mode cost of one joint over a trajectory slice (u is its acceleration)."""
    return running_cost(weights, segment.t, segment.theta_ddot[:, joint],
                        segment.theta_dot[:, joint])


@dataclass(frozen=True)
class ThrowOutcome:
    """Release quantities and the resulting ballistic range."""

    speed: float            # v_f
    angle: float            # theta_f, the summed joint sweeps at release
    height: float           # h
    flight_time: float
    range: float
    v_x: float
    v_y: float
    feasible: bool = True


def flight_time(v_f: float, theta_f: float, h: float, g: float) -> float:
    """Ballistic flight time from release speed/angle/height to the ground."""
    if g <= 0:
        raise ValueError("g must be positive")
    if h < 0:
        raise ValueError("release below the landing plane is unsupported")
    vs = v_f * np.sin(theta_f)
    return float((vs + np.sqrt(vs * vs + 2.0 * g * h)) / g)


def throw_objective(model: ChainModel, release_state: JointState, T=None,
                    sweep_start=None) -> ThrowOutcome:
    """Throwing range of a two-link chain released at the final state.

    ``sweep_start`` gives each joint's angle at its first activation; the
    sweeps entering the release geometry are measured from there (zero when
    omitted).  A release below the landing plane is reported as an infeasible
    zero-range outcome rather than an error so outer searches stay total.
    """
    if model.n_joints != 2:
        raise ValueError("throw objective is defined for a two-link chain")
    th = release_state.theta
    thd = release_state.theta_dot
    start = np.zeros(2) if sweep_start is None else np.asarray(sweep_start, dtype=float)
    sweep = th - start
    th1, th2 = sweep
    l1, l2 = model.lengths
    v_x = l2 * thd[1] * np.cos(th2) + l1 * thd[0] * np.cos(th1)
    v_y = l2 * thd[1] * np.sin(th2) + l1 * thd[0] * np.sin(th1)
    v_f = float(np.hypot(v_x, v_y))
    theta_f = float(th1 + th2)
    h = float(l2 * np.sin(theta_f) + l1 * np.sin(th1))
    if h < 0.0:
        return ThrowOutcome(v_f, theta_f, h, 0.0, 0.0, float(v_x), float(v_y),
                            feasible=False)
    t_fl = flight_time(v_f, theta_f, h, model.gravity)
    rng = float(v_f * np.cos(theta_f) * t_fl)
    return ThrowOutcome(v_f, theta_f, h, t_fl, rng, float(v_x), float(v_y))
