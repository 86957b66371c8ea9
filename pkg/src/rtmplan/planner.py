"""Schedule evaluation and the outer search over response-time matrices.

``evaluate_motion`` realizes one candidate matrix: joints are processed
distal to proximal, each interval of a joint's mode timeline is either
solved as a segment problem (Active / Transition) or integrated under the
passive compliance law, with cross-joint coupling frozen from the previous
block-coordinate sweep.  The assembled motion is scored as the task
objective minus quadratic penalties on the less-critical constraints;
critical violations make the score a large negative total so the outer
derivative-free search stays defined everywhere.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import cost as cost_mod
from . import dynamics as dyn
from .dynamics import ChainModel, JointState, Trajectory
from .errors import ConvergenceError, InfeasibleSegmentError, PlanningError
from .kernels import inverse_dynamics_batch as _id_batch
from .kernels import mass_diag_batch as _mdiag_batch
from .kernels import rk4_compliance as _rk4_compliance
from .ocp import CouplingTables, OcpSpec, SegmentConstraint, solve_segment
from .schedule import JointMode, ModeSchedule, ResponseTimeMatrix, TimeMatrixCodec, validate

_INFEASIBLE_BASE = 1e6


# ---------------------------------------------------------------------------
# composed joint motion


@dataclass
class _OcpPiece:
    t0: float
    t1: float
    t_nodes: np.ndarray
    theta: np.ndarray
    v: np.ndarray
    u: np.ndarray

    def sample(self, tq):
        """Cubic-Hermite evaluation from the nodal (theta, v) pairs.

        The emitted velocity is the exact derivative of the emitted angle
        and the acceleration its exact derivative in turn.
        """
        t = self.t_nodes
        h = t[1] - t[0]
        idx = np.clip(np.searchsorted(t, tq, side="right") - 1, 0, t.size - 2)
        s = (tq - t[idx]) / h
        th0, th1 = self.theta[idx], self.theta[idx + 1]
        v0, v1 = self.v[idx], self.v[idx + 1]
        s2, s3 = s * s, s * s * s
        th = ((2 * s3 - 3 * s2 + 1) * th0 + (s3 - 2 * s2 + s) * h * v0
              + (-2 * s3 + 3 * s2) * th1 + (s3 - s2) * h * v1)
        vv = ((6 * s2 - 6 * s) * th0 / h + (3 * s2 - 4 * s + 1) * v0
              + (6 * s - 6 * s2) * th1 / h + (3 * s2 - 2 * s) * v1)
        aa = ((12 * s - 6) * th0 / (h * h) + (6 * s - 4) * v0 / h
              + (6 - 12 * s) * th1 / (h * h) + (6 * s - 2) * v1 / h)
        return th, vv, aa


@dataclass
class _PassivePiece:
    t0: float
    t1: float
    t_grid: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    theta_ddot: np.ndarray

    def sample(self, tq):
        th = np.interp(tq, self.t_grid, self.theta)
        vv = np.interp(tq, self.t_grid, self.theta_dot)
        aa = np.interp(tq, self.t_grid, self.theta_ddot)
        return th, vv, aa


@dataclass
class _JointMotion:
    pieces: list

    def sample(self, tq):
        tq = np.asarray(tq, dtype=float)
        th = np.empty_like(tq)
        vv = np.empty_like(tq)
        aa = np.empty_like(tq)
        for i, piece in enumerate(self.pieces):
            last = i == len(self.pieces) - 1
            mask = (tq >= piece.t0 - 1e-12) & ((tq < piece.t1 - 1e-12) | last)
            if np.any(mask):
                th[mask], vv[mask], aa[mask] = piece.sample(tq[mask])
        return th, vv, aa


# ---------------------------------------------------------------------------
# frozen coupling estimate


class _CouplingEstimate:
    """Joint profiles sampled on a shared grid plus derived torque tables."""

    def __init__(self, model: ChainModel, t_grid, theta0):
        self.model = model
        self.t = np.asarray(t_grid, dtype=float)
        n = model.n_joints
        self.TH = np.tile(np.asarray(theta0, dtype=float), (self.t.size, 1))
        self.THD = np.zeros((self.t.size, n))
        self.THDD = np.zeros((self.t.size, n))

    def update_joint(self, k, motion: _JointMotion):
        th, vv, aa = motion.sample(self.t)
        self.TH[:, k] = th
        self.THD[:, k] = vv
        self.THDD[:, k] = aa

    def tables_for(self, k):
        """Torque map slope/bias and the remaining power budget for joint k."""
        m = self.model
        tau = _id_batch(m._Z, m._W, m._Isuf, m.gravity, self.TH, self.THD, self.THDD)
        mdiag = _mdiag_batch(m._Z, m._Isuf, self.TH)
        a = mdiag[:, k]
        b = tau[:, k] - a * self.THDD[:, k]
        others = np.abs(tau * self.THD)
        others[:, k] = 0.0
        budget = m.power_sys - np.sum(others, axis=1)
        return a, b, tau[:, k], budget


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalOutcome:
    score: float
    task_value: float
    penalty_total: float
    violation_critical: float
    violation_soft: float
    feasible: bool
    matrix: ResponseTimeMatrix
    schedule: ModeSchedule | None
    trajectory: Trajectory | None
    segments: list = field(default_factory=list)
    throw: cost_mod.ThrowOutcome | None = None
    task_terms: dict = field(default_factory=dict)
    failure: str | None = None


def _segment_constraints(scenario, k, critical_only_kinds=None):
    out = []
    m = scenario.model
    for pol in scenario.constraints:
        if pol.kind == "torque":
            out.append(SegmentConstraint("torque", "torque", pol.critical, pol.gain,
                                         lower=m.tau_min[k], upper=m.tau_max[k]))
        elif pol.kind == "power_joint":
            out.append(SegmentConstraint("power_joint", "power_joint", pol.critical,
                                         pol.gain, lower=m.power_min[k],
                                         upper=m.power_max[k]))
        elif pol.kind == "power_sys":
            out.append(SegmentConstraint("power_sys", "power_sys", pol.critical,
                                         pol.gain, upper=m.power_sys))
    return tuple(out)


def _interval_weights(scenario, interval, table):
    if interval.mode is JointMode.TRANSITION:
        wa = cost_mod.weights_for_mode(interval.from_mode, table)
        wb = cost_mod.weights_for_mode(interval.to_mode, table)
        return (wa, wb)
    return cost_mod.weights_for_mode(interval.mode, table)


def _process_joint(scenario, schedule, k, coupling: _CouplingEstimate,
                   sample_times, diagnostics, segments_out):
    """Solve/integrate joint k's full timeline against the frozen coupling."""
    m = scenario.model
    table = scenario.weight_table()
    cons = _segment_constraints(scenario, k)
    goal_cfg = scenario.goal_for(k)
    a_all, b_all, taupr_all, budget_all = coupling.tables_for(k)

    pieces = []
    th, vv = float(scenario.theta0[k]), float(scenario.theta_dot0[k])
    spans = schedule.intervals[k]
    for idx, interval in enumerate(spans):
        t0, t1 = interval.start, interval.stop
        is_last = idx == len(spans) - 1
        if interval.mode is JointMode.PASSIVE:
            # deviation oscillator around the frozen reference theta(t0)
            grid = sample_times[(sample_times > t0 + 1e-12) & (sample_times < t1 - 1e-12)]
            grid = np.concatenate([[t0], grid, [t1]])
            taupr = np.interp(grid, coupling.t, taupr_all)
            dev, devd, devdd = _rk4_compliance(
                float(scenario.compliance.inertia[k]),
                float(scenario.compliance.damping[k]),
                float(scenario.compliance.stiffness[k]),
                grid, taupr, 0.0, -vv)
            pieces.append(_PassivePiece(t0, t1, grid, th - dev, -devd, -devdd))
            th, vv = th - dev[-1], -devd[-1]
        else:
            n_c = scenario.ocp_nodes
            if t1 - t0 < 2.5 * schedule.blend:
                n_c = scenario.transition_nodes
            goal = None
            if goal_cfg is not None and is_last:
                goal = ("box", tuple(goal_cfg.theta), tuple(goal_cfg.theta_dot))
            spec = OcpSpec(
                t0=t0, t1=t1, theta0=th, v0=vv,
                weights=_interval_weights(scenario, interval, table),
                u_max=float(scenario.u_max[k]), n_c=n_c, goal=goal,
                theta_bounds=(float(m.theta_min[k]), float(m.theta_max[k])),
                v_bounds=(-float(scenario.v_max[k]), float(scenario.v_max[k])),
                constraints=cons,
                direction=float(scenario.directions[k]),
                diagnostics=diagnostics,
                label=f"joint{k}/{interval.mode.letter}{idx}",
            )
            nodes = np.linspace(t0, t1, n_c)
            tables = CouplingTables(
                np.interp(nodes, coupling.t, a_all),
                np.interp(nodes, coupling.t, b_all),
                np.interp(nodes, coupling.t, budget_all),
            )
            sol = solve_segment(spec, coupling=tables, mode=interval.mode)
            segments_out.append(sol)
            pieces.append(_OcpPiece(t0, t1, sol.t_nodes, sol.theta, sol.v, sol.u))
            th, vv = float(sol.theta[-1]), float(sol.v[-1])
    return _JointMotion(pieces)


def _task_value(scenario, schedule, traj: Trajectory):
    """Task objective oriented so that larger is better, plus its terms."""
    release = traj.state_at_index(traj.t.size - 1)
    terms = {"t_f": float(traj.t[-1])}
    throw = None
    if scenario.objective == "throw_range":
        starts = np.empty(scenario.model.n_joints)
        for k in range(scenario.model.n_joints):
            t_act = schedule.first_activation(k)
            if np.isfinite(t_act):
                i = int(np.searchsorted(traj.t, t_act))
                i = min(i, traj.t.size - 1)
                starts[k] = traj.theta[i, k]
            else:
                starts[k] = traj.theta[0, k]
        throw = cost_mod.throw_objective(scenario.model, release, schedule.matrix,
                                         sweep_start=starts)
        terms.update({"range": throw.range, "speed": throw.speed,
                      "angle": throw.angle, "height": throw.height})
        return throw.range, throw, terms
    if scenario.objective == "terminal_speed":
        d = float(scenario.objective_params.get("direction", 1.0))
        val = float(d * release.theta_dot[0])
        terms["terminal_speed"] = val
        return val, None, terms
    # terminal time + integrated squared torque, with a goal-miss guard
    p = scenario.objective_params
    w_t = float(p.get("time_weight", 1.0))
    w_tau = float(p.get("torque_weight", 1e-3))
    w_goal = float(p.get("goal_weight", 1e4))
    tau_int = float(np.sum(cost_mod._trapz(traj.tau ** 2, traj.t, axis=0)))
    miss = 0.0
    for g in scenario.goals:
        thf = traj.theta[-1, g.joint]
        vf = traj.theta_dot[-1, g.joint]
        miss += max(0.0, g.theta[0] - thf, thf - g.theta[1]) ** 2
        miss += max(0.0, g.theta_dot[0] - vf, vf - g.theta_dot[1]) ** 2
    cost_val = w_t * float(traj.t[-1]) + w_tau * tau_int + w_goal * miss
    terms.update({"torque_integral": tau_int, "goal_miss": miss, "cost": cost_val})
    return -cost_val, None, terms


def _constraint_values(scenario, traj: Trajectory):
    """Per-family stacked g values (g <= 0 feasible) on the trajectory grid."""
    m = scenario.model
    crit, soft = [], []
    # angle limits are structural; the commanded-speed limit binds actuated
    # samples only (a passive joint is back-driven and may whip past it)
    for k in range(m.n_joints):
        crit.append(traj.theta[:, k] - m.theta_max[k])
        crit.append(m.theta_min[k] - traj.theta[:, k])
        active = traj.modes[:, k] == "A"
        if np.any(active):
            crit.append(np.abs(traj.theta_dot[active, k]) - scenario.v_max[k])
    gains = []
    for pol in scenario.constraints:
        if pol.kind == "torque":
            g = np.concatenate([(traj.tau[:, k] - m.tau_max[k]) for k in range(m.n_joints)]
                               + [(m.tau_min[k] - traj.tau[:, k]) for k in range(m.n_joints)])
        elif pol.kind == "power_joint":
            p = traj.tau * traj.theta_dot
            g = np.concatenate([(p[:, k] - m.power_max[k]) for k in range(m.n_joints)]
                               + [(m.power_min[k] - p[:, k]) for k in range(m.n_joints)])
        else:
            g = traj.power() - m.power_sys
        if pol.critical:
            crit.append(g)
        else:
            soft.append(g)
            gains.append(pol.gain)
    return (np.concatenate(crit) if crit else np.zeros(0)), soft, gains


# small slack absorbing interpolation overshoot between segment nodes and the
# one-sweep lag of the frozen coupling; the power cap keeps its strict margin
_CRIT_TOL = {"default": 5e-3}


def evaluate_motion(T: ResponseTimeMatrix, scenario, *, resolution=None,
                    diagnostics=False) -> EvalOutcome:
    """Realize and score one response-time matrix.

    ``resolution``: None evaluates on the coarse coupling grid (search mode);
    a float emits the final trajectory at that uniform step with every
    switch instant inserted exactly.
    """
    try:
        schedule = validate(T, blend=scenario.blend)
    except Exception as e:
        return EvalOutcome(
            score=-_INFEASIBLE_BASE, task_value=np.nan, penalty_total=np.nan,
            violation_critical=np.inf, violation_soft=np.inf, feasible=False,
            matrix=T, schedule=None, trajectory=None, failure=f"schedule: {e}")

    t_f = schedule.t_f
    model = scenario.model
    n = model.n_joints

    if resolution is None:
        out_grid = np.linspace(0.0, t_f, scenario.coupling_points)
        events = schedule.event_times()
        out_grid = np.unique(np.concatenate([out_grid, events]))
    else:
        out_grid = dyn.build_grid(0.0, t_f, resolution, schedule.event_times())

    coupling = _CouplingEstimate(model, np.linspace(0.0, t_f, scenario.coupling_points),
                                 scenario.theta0)
    segments = []
    motions = [None] * n
    try:
        for sweep in range(scenario.sweeps):
            segments = []
            for k in reversed(range(n)):
                motions[k] = _process_joint(scenario, schedule, k, coupling,
                                            coupling.t, diagnostics, segments)
                coupling.update_joint(k, motions[k])
    except (InfeasibleSegmentError, ConvergenceError) as e:
        return EvalOutcome(
            score=-(_INFEASIBLE_BASE + 1.0), task_value=np.nan, penalty_total=np.nan,
            violation_critical=np.inf, violation_soft=np.inf, feasible=False,
            matrix=T, schedule=schedule, trajectory=None, segments=segments,
            failure=f"segment: {e}")

    # assemble on the output grid
    TH = np.empty((out_grid.size, n))
    THD = np.empty_like(TH)
    THDD = np.empty_like(TH)
    for k in range(n):
        if resolution is not None:
            # regenerate passive pieces at the output resolution
            motions[k] = _process_joint(scenario, schedule, k, coupling,
                                        out_grid, diagnostics, segments)
        TH[:, k], THD[:, k], THDD[:, k] = motions[k].sample(out_grid)
    TAU = _id_batch(model._Z, model._W, model._Isuf, model.gravity, TH, THD, THDD)
    MODES = np.empty((out_grid.size, n), dtype="<U1")
    for k in range(n):
        MODES[:, k] = [schedule.mode_letter(k, t) for t in out_grid]
    traj = Trajectory(out_grid, TH, THD, THDD, TAU, MODES,
                      scenario.dt if resolution else float(out_grid[1] - out_grid[0]),
                      switch_times=tuple(float(s) for k in range(n)
                                         for s in schedule.toggle_times(k)))

    task, throw, terms = _task_value(scenario, schedule, traj)
    g_crit, g_soft_list, gains = _constraint_values(scenario, traj)
    v_crit = float(np.sum(np.maximum(0.0, g_crit - _CRIT_TOL["default"])))
    v_soft = float(sum(np.sum(np.maximum(0.0, g)) for g in g_soft_list))
    pen = float(sum(k_j * np.sum(np.maximum(0.0, g) ** 2)
                    for g, k_j in zip(g_soft_list, gains)))
    feasible = v_crit <= 0.0

    if not feasible:
        score = -(_INFEASIBLE_BASE + v_crit + v_soft)
    else:
        score = task - pen
    return EvalOutcome(
        score=float(score), task_value=float(task), penalty_total=pen,
        violation_critical=v_crit, violation_soft=v_soft, feasible=feasible,
        matrix=T, schedule=schedule, trajectory=traj, segments=segments,
        throw=throw, task_terms=terms)


# ---------------------------------------------------------------------------
# outer search


@dataclass
class PlanResult:
    matrix: ResponseTimeMatrix
    z: np.ndarray
    score: float
    task_value: float
    outcome: EvalOutcome
    trace: list                       # (evaluation index, best score so far)
    n_evaluations: int
    duration_s: float
    seed: int
    baselines: dict = field(default_factory=dict)

    @property
    def trajectory(self) -> Trajectory:
        return self.outcome.trajectory


def optimize_T(scenario, T_init: ResponseTimeMatrix | None = None,
               budget: int | None = None, seed: int = 0,
               restarts: int | None = None) -> PlanResult:
    """Simplex search with restarts over the unconstrained gap encoding."""
    t_start = time.perf_counter()
    template = T_init if T_init is not None else scenario.template
    codec = TimeMatrixCodec(template)
    z0 = codec.encode(template)
    budget = int(budget if budget is not None else scenario.budget)
    restarts = int(restarts if restarts is not None else scenario.restarts)
    rng = np.random.default_rng(seed)

    evals = 0
    best = {"score": -np.inf, "z": None, "out": None}
    trace = []

    def objective(z):
        nonlocal evals
        evals += 1
        out = evaluate_motion(codec.decode(z), scenario)
        better = out.score > best["score"] or (
            out.score == best["score"] and best["z"] is not None
            and tuple(z) < tuple(best["z"]))
        if better:
            best.update(score=out.score, z=z.copy(), out=out)
        trace.append((evals, best["score"]))
        return -out.score

    per_start = max(budget // restarts, 1)
    for r in range(restarts):
        if evals >= budget:
            break
        z_start = z0 if r == 0 else z0 + rng.normal(scale=scenario.jitter, size=z0.size)
        maxfev = min(per_start, budget - evals)
        minimize(objective, z_start, method="Nelder-Mead",
                 options={"maxfev": maxfev, "xatol": 1e-3, "fatol": 1e-4,
                          "adaptive": True})

    if best["z"] is None or not np.isfinite(best["score"]):
        raise PlanningError("search produced no evaluations", diagnostics=trace)
    if best["out"] is not None and not best["out"].feasible:
        raise PlanningError(
            f"every evaluated schedule was infeasible (best failure: "
            f"{best['out'].failure or 'critical constraint violation'})",
            diagnostics=best["out"])

    T_best = codec.decode(best["z"])
    final = evaluate_motion(T_best, scenario, resolution=scenario.dt,
                            diagnostics=True)
    return PlanResult(
        matrix=T_best, z=best["z"], score=final.score,
        task_value=final.task_value, outcome=final, trace=trace,
        n_evaluations=evals, duration_s=time.perf_counter() - t_start,
        seed=seed)


# ---------------------------------------------------------------------------
# baselines


def synchronous_matrix(scenario, horizon=None) -> ResponseTimeMatrix:
    """Every joint active from t = eps to the horizon, no staggering."""
    t_f = float(horizon if horizon is not None else scenario.template.t_f)
    eps = min(1e-3, scenario.dt)
    n = scenario.model.n_joints
    times = np.tile([eps, t_f], (n, 1))
    return ResponseTimeMatrix(times, tuple(JointMode.PASSIVE for _ in range(n)))


def make_baselines(scenario, horizon=None, warm: PlanResult | None = None) -> dict:
    """Synchronous reference plan plus the dense whole-horizon oracle."""
    out = {}
    sync_T = synchronous_matrix(scenario, horizon)
    out["synchronous"] = evaluate_motion(sync_T, scenario, resolution=scenario.dt)
    try:
        out["oracle"] = dense_oracle(scenario, horizon=horizon, warm=warm)
    except Exception as e:  # reported, ratio omitted
        out["oracle"] = None
        out["oracle_failure"] = str(e)
    return out


def performance_ratio(scenario, plan_task: float, oracle_task: float) -> float:
    """Achievement ratio in [0, inf): how much of the oracle's quality the
    staged planner reaches.  Maximization tasks compare values directly,
    minimization tasks compare costs the other way up."""
    if scenario.objective in ("throw_range", "terminal_speed"):
        if oracle_task <= 0:
            return np.inf
        return float(plan_task / oracle_task)
    cost_plan = -plan_task
    cost_oracle = -oracle_task
    if cost_plan <= 0:
        return np.inf
    return float(cost_oracle / cost_plan)


@dataclass
class OracleResult:
    task_value: float
    theta: np.ndarray
    theta_dot: np.ndarray
    u: np.ndarray
    tau: np.ndarray
    t_nodes: np.ndarray
    converged: bool
    message: str


def dense_oracle(scenario, horizon=None, n_nodes=60,
                 warm: PlanResult | None = None) -> OracleResult:
    """Whole-horizon all-joint direct collocation without the matrix layer.

    Every joint is driven over the full horizon; the task objective is
    optimized directly.  States are reconstructed from controls exactly as
    in the segment solver, so the decision vector stacks the joints' control
    profiles.
    """
    model = scenario.model
    n = model.n_joints
    t_f = float(horizon if horizon is not None else scenario.template.t_f)
    times = np.linspace(0.0, t_f, n_nodes)
    h = times[1] - times[0]

    S = np.zeros((n_nodes, n_nodes))
    for i in range(1, n_nodes):
        S[i, 0] = 0.5 * h
        S[i, 1:i] = h
        S[i, i] = 0.5 * h
    R = np.zeros((n_nodes, n_nodes))
    for i in range(1, n_nodes):
        R[i] = R[i - 1] + 0.5 * h * (S[i - 1] + S[i])

    th0 = scenario.theta0
    v0 = scenario.theta_dot0

    def states(x):
        U = x.reshape(n, n_nodes)
        V = v0[:, None] + (S @ U.T).T
        TH = th0[:, None] + np.outer(v0, times) + (R @ U.T).T
        return TH.T, V.T, U.T          # (n_nodes, n) each

    def torques(x):
        TH, V, U = states(x)
        return _id_batch(model._Z, model._W, model._Isuf, model.gravity, TH, V, U)

    wq = np.full(n_nodes, h)
    wq[0] = wq[-1] = 0.5 * h

    p = scenario.objective_params

    def objective(x):
        TH, V, U = states(x)
        if scenario.objective == "throw_range":
            release = JointState(TH[-1], V[-1], U[-1])
            # smooth floor keeps the square root defined while iterating
            out = cost_mod.throw_objective(model, release, sweep_start=th0)
            if not out.feasible:
                vs = out.speed * np.sin(out.angle)
                h_eff = 0.5 * (out.height + np.hypot(out.height, 1e-3))
                tf = (vs + np.sqrt(vs * vs + 2 * model.gravity * h_eff)) / model.gravity
                return -out.speed * np.cos(out.angle) * tf
            return -out.range
        if scenario.objective == "terminal_speed":
            return -float(p.get("direction", 1.0)) * V[-1, 0]
        tau = torques(x)
        miss = 0.0
        for g in scenario.goals:
            thf, vf = TH[-1, g.joint], V[-1, g.joint]
            miss += max(0.0, g.theta[0] - thf, thf - g.theta[1]) ** 2
            miss += max(0.0, g.theta_dot[0] - vf, vf - g.theta_dot[1]) ** 2
        return (float(p.get("time_weight", 1.0)) * t_f
                + float(p.get("torque_weight", 1e-3)) * float(np.sum(wq @ (tau ** 2)))
                + float(p.get("goal_weight", 1e4)) * miss)

    cons = []
    # state boxes per joint (first node pinned by construction)
    rows_v = []
    rows_th = []
    for k in range(n):
        rows_v.append((k, scenario.v_max[k]))
        rows_th.append((k, model.theta_min[k], model.theta_max[k]))

    def ineq(x):
        TH, V, _ = states(x)
        parts = []
        for k, vcap in rows_v:
            parts.append(vcap - V[1:, k])
            parts.append(vcap + V[1:, k])
        for k, tlo, thi in rows_th:
            parts.append(thi - TH[1:, k])
            parts.append(TH[1:, k] - tlo)
        if any(c.kind == "torque" for c in scenario.constraints):
            tau = torques(x)
            for k in range(n):
                parts.append(model.tau_max[k] - tau[:, k])
                parts.append(tau[:, k] - model.tau_min[k])
        return np.concatenate(parts)

    cons.append({"type": "ineq", "fun": ineq})

    eqs = []
    for g in scenario.goals:
        k = g.joint
        tc = 0.5 * (g.theta[0] + g.theta[1])
        vc = 0.5 * (g.theta_dot[0] + g.theta_dot[1])

        def eq(x, k=k, tc=tc, vc=vc):
            TH, V, _ = states(x)
            return np.array([TH[-1, k] - tc, V[-1, k] - vc])

        eqs.append({"type": "eq", "fun": eq})
    cons.extend(eqs)

    lo = np.repeat(-scenario.u_max, n_nodes)
    hi = np.repeat(scenario.u_max, n_nodes)

    # structured starts: a late burst timed to peak speed at release, a
    # mid-horizon ramp, and (when given) the staged plan's own profile
    starts = []
    late = np.zeros((n, n_nodes))
    for k in range(n):
        d = scenario.directions[k]
        ramp = scenario.v_max[k] / scenario.u_max[k]
        late[k] = np.where(times >= t_f - ramp, d * scenario.u_max[k], 0.0)
    starts.append(late.reshape(-1))
    mid = np.zeros((n, n_nodes))
    for k in range(n):
        mid[k] = 0.3 * scenario.directions[k] * scenario.u_max[k]
    starts.append(mid.reshape(-1))
    if warm is not None and warm.trajectory is not None:
        w = np.empty((n, n_nodes))
        for k in range(n):
            w[k] = np.interp(times, warm.trajectory.t, warm.trajectory.theta_ddot[:, k])
        starts.append(w.reshape(-1))

    from scipy.optimize import Bounds
    best = None
    for x0 in starts:
        res = minimize(objective, np.clip(x0, lo, hi), method="SLSQP",
                       bounds=Bounds(lo, hi), constraints=cons,
                       options={"maxiter": 250, "ftol": 1e-8})
        feas_ok = res.success and np.all(ineq(res.x) > -1e-6)
        if best is None or (feas_ok and res.fun < best[0]):
            best = (res.fun if feas_ok else np.inf, res)
    res = best[1]
    TH, V, U = states(res.x)
    tau = torques(res.x)
    # both branches minimize the negative of the (larger-is-better) task value
    val = -float(res.fun)
    return OracleResult(task_value=float(val), theta=TH, theta_dot=V, u=U,
                        tau=tau, t_nodes=times, converged=bool(res.success),
                        message=str(res.message))
