"""Per-segment constrained optimal control by direct transcription.

Each joint segment is a double integrator (state theta, theta_dot; control
u = theta_ddot) transcribed trapezoidally on n_c nodes.  The defect rows are
linear, so the solver iterates in their null space: states are reconstructed
exactly from the controls through the trapezoid recursion and the SQP works
on the reduced problem (defect residuals are zero by construction).  Cross-
joint coupling enters through a frozen torque map tau = a(t) * u + b(t)
sampled at the nodes; with a > 0 the critical torque limits fold into exact
per-node control boxes.  Remaining critical constraints become hard NLP
constraints (with multiplier recovery), less-critical ones quadratic
penalties driven by an outer continuation on their gains.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, minimize

from .cost import CostWeights
from .errors import ConvergenceError, InfeasibleSegmentError

# SLSQP's own trial steps may poke past the bounds before clipping; that is
# business as usual, not something callers should see
warnings.filterwarnings(
    "ignore", message="Values in x were outside bounds during a minimize step")


def violation_measure(g_values) -> float:
    """Sum of positive parts; zero iff every constraint value is feasible."""
    g = np.asarray(g_values, dtype=float)
    if g.size == 0:
        return 0.0
    return float(np.sum(np.maximum(0.0, g)))


def penalty(g_j: float, critical: bool, mu_j: float = 0.0, k_j: float = 1.0) -> float:
    """Constraint penalty term: mu*g for critical, k*g^2 above zero otherwise."""
    if critical:
        if mu_j < 0:
            raise ValueError("multipliers must be non-negative")
        return mu_j * g_j
    if k_j <= 0:
        raise ValueError("penalty gain must be positive")
    return k_j * g_j * g_j if g_j > 0.0 else 0.0


@dataclass
class AugmentedState:
    """Costates for the dynamics rows plus inequality multipliers."""

    costates: np.ndarray
    multipliers: np.ndarray

    def __post_init__(self):
        self.costates = np.asarray(self.costates, dtype=float).reshape(-1)
        self.multipliers = np.asarray(self.multipliers, dtype=float).reshape(-1)
        if np.any(self.multipliers < 0):
            raise ValueError("inequality multipliers must be non-negative")


def augmented_hamiltonian(L_val, f_val, g_vals, state: AugmentedState,
                          penalties=()) -> float:
    """H_a = L + lambda^T f + mu^T g + sum of penalty terms."""
    f = np.asarray(f_val, dtype=float).reshape(-1)
    g = np.asarray(g_vals, dtype=float).reshape(-1)
    if f.size != state.costates.size:
        raise ValueError("costate length must match the dynamics dimension")
    if g.size != state.multipliers.size:
        raise ValueError("multiplier length must match the constraint count")
    h = float(L_val) + float(state.costates @ f) + float(state.multipliers @ g)
    return h + float(np.sum(np.asarray(penalties, dtype=float)))


@dataclass
class SegmentConstraint:
    """One inequality family evaluated at every node.

    kind: 'torque' bounds a*u+b, 'power_joint' bounds (a*u+b)*v, 'power_sys'
    caps |(a*u+b)*v| by the per-node budget of the coupling tables.
    """

    name: str
    kind: str
    critical: bool = True
    gain: float = 100.0
    lower: float = -np.inf
    upper: float = np.inf

    def __post_init__(self):
        if self.kind not in ("torque", "power_joint", "power_sys"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.gain <= 0:
            raise ValueError("penalty gain must be positive")


@dataclass
class CouplingTables:
    """Frozen per-node torque map tau = a * u + b and system power budget."""

    a: np.ndarray
    b: np.ndarray
    power_budget: np.ndarray | None = None

    @staticmethod
    def identity(n: int) -> "CouplingTables":
        return CouplingTables(np.ones(n), np.zeros(n), None)


@dataclass
class OcpSpec:
    """One segment problem: horizon, boundary data, weights, constraints."""

    t0: float
    t1: float
    theta0: float
    v0: float
    weights: object                      # CostWeights or (from, to) blend pair
    u_max: float
    n_c: int = 30
    goal: tuple | None = None            # ('point', th, v) | ('box', (lo,hi), (lo,hi))
    theta_bounds: tuple = (-np.inf, np.inf)
    v_bounds: tuple = (-np.inf, np.inf)
    constraints: tuple = ()
    direction: float = 1.0
    maxiter: int = 200
    ftol: float = 1e-10
    violation_tol: float = 1e-6
    gain_cap: float = 1e6
    diagnostics: bool = True
    x_init: np.ndarray | None = None     # control profile (n) or nodal (3n)
    label: str = ""

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise ValueError("segment horizon must have t0 < t1")
        if self.n_c < 3:
            raise ValueError("need at least 3 collocation nodes")
        if self.u_max <= 0:
            raise ValueError("control bound must be positive")


@dataclass
class SegmentSolution:
    t_nodes: np.ndarray
    theta: np.ndarray
    v: np.ndarray
    u: np.ndarray
    tau: np.ndarray
    objective: float
    mode_cost: float
    penalty_value: float
    violation: float
    violation_history: list
    defect_residual: float
    stationarity_residual: float
    slackness_residual: float
    hessian_convex: bool
    multipliers: dict = field(default_factory=dict)
    n_iter: int = 0
    converged: bool = True
    message: str = ""
    label: str = ""


# ---------------------------------------------------------------------------
# reachability pre-check


def reachable_span(theta0, v0, vg, u_max, horizon):
    """Extreme displacements of a double integrator that ends at speed vg.

    Single-switch bang profiles; a necessary bound used to reject impossible
    boundary pairs before the NLP sees them.  Returns None when the speed
    change itself is impossible.
    """
    T = horizon
    if abs(vg - v0) > u_max * T + 1e-9:
        return None
    out = []
    for sgn in (1.0, -1.0):
        t1 = (sgn * (vg - v0) + u_max * T) / (2.0 * u_max)
        t1 = min(max(t1, 0.0), T)
        vp = v0 + sgn * u_max * t1
        d = v0 * t1 + sgn * 0.5 * u_max * t1 * t1
        d += vp * (T - t1) - sgn * 0.5 * u_max * (T - t1) ** 2
        out.append(theta0 + d)
    return min(out), max(out)


def _check_reachability(spec: OcpSpec):
    if spec.goal is None:
        return
    horizon = spec.t1 - spec.t0
    if spec.goal[0] == "point":
        thg, vg = spec.goal[1], spec.goal[2]
    else:
        (tlo, thi), (vlo, vhi) = spec.goal[1], spec.goal[2]
        vg = min(max(spec.v0, vlo), vhi)
        thg = None
    span = reachable_span(spec.theta0, spec.v0, vg, spec.u_max, horizon)
    if span is None:
        raise InfeasibleSegmentError(
            f"goal speed unreachable from v0={spec.v0} in {horizon:.4f}s "
            f"under |u| <= {spec.u_max}")
    if thg is not None:
        if not span[0] - 1e-9 <= thg <= span[1] + 1e-9:
            raise InfeasibleSegmentError(
                f"goal angle {thg} outside reachable span {span}")
    else:
        lo, hi = spec.goal[1]
        if hi < span[0] - 1e-9 or lo > span[1] + 1e-9:
            raise InfeasibleSegmentError("goal box outside the reachable span")


# ---------------------------------------------------------------------------
# transcription pieces (reduced space)


def _node_weights(spec: OcpSpec, times):
    w = spec.weights
    if isinstance(w, CostWeights):
        return (np.full(times.size, w.k_u), np.full(times.size, w.k_v),
                np.full(times.size, w.k_a))
    wa, wb = w
    frac = (times - times[0]) / (times[-1] - times[0])
    return ((1 - frac) * wa.k_u + frac * wb.k_u,
            (1 - frac) * wa.k_v + frac * wb.k_v,
            (1 - frac) * wa.k_a + frac * wb.k_a)


def _affine_maps(n, h):
    """v = v0 + S u and theta = theta0 + t v0 + R u (trapezoid recursions)."""
    S = np.zeros((n, n))
    for i in range(1, n):
        S[i, 0] = 0.5 * h
        S[i, 1:i] = h
        S[i, i] = 0.5 * h
    R = np.zeros((n, n))
    for i in range(1, n):
        R[i] = R[i - 1] + 0.5 * h * (S[i - 1] + S[i])
    return S, R


def _control_box(spec: OcpSpec, a_t, b_t):
    """Control bound intersected with the critical torque limits."""
    n = a_t.size
    lo = np.full(n, -spec.u_max)
    hi = np.full(n, spec.u_max)
    src_lo = np.zeros(n, dtype=int)    # 0: control bound, 1: torque limit
    src_hi = np.zeros(n, dtype=int)
    if np.any(a_t <= 0):
        raise ValueError("coupling slope must stay positive (inertia diagonal)")
    for con in spec.constraints:
        if con.kind != "torque" or not con.critical:
            continue
        tlo = (con.lower - b_t) / a_t
        thi = (con.upper - b_t) / a_t
        src_lo = np.where(tlo > lo, 1, src_lo)
        src_hi = np.where(thi < hi, 1, src_hi)
        lo = np.maximum(lo, tlo)
        hi = np.minimum(hi, thi)
    if np.any(lo > hi + 1e-12):
        i = int(np.argmax(lo - hi))
        raise InfeasibleSegmentError(
            f"torque limits leave no feasible control at node {i} "
            f"(bias {b_t[i]:.3f} exceeds the limits)")
    hi = np.maximum(hi, lo)
    return lo, hi, src_lo, src_hi


def _greedy_profile(spec: OcpSpec, n, h, lo, hi):
    """Cap-riding control: drive the speed to its bound and hold it there.

    This is the maximizer of the speed-seeking mode cost when no terminal
    set binds, so it doubles as the solution structure and the cold start.
    """
    sgn = 1.0 if spec.direction >= 0 else -1.0
    vcap = spec.v_bounds[1] if sgn > 0 else spec.v_bounds[0]
    if not np.isfinite(vcap):
        vcap = spec.v0 + sgn * spec.u_max * (spec.t1 - spec.t0)
    u = np.empty(n)
    v = spec.v0
    if (vcap - v) * sgn > 0:
        u[0] = hi[0] if sgn > 0 else lo[0]
    else:
        u[0] = lo[0] if sgn > 0 else hi[0]
    for i in range(n - 1):
        need = 2.0 * (vcap - v) / h - u[i]
        ui1 = sgn * min(need * sgn, (hi[i + 1] if sgn > 0 else -lo[i + 1]))
        u[i + 1] = min(max(ui1, lo[i + 1]), hi[i + 1])
        v = v + 0.5 * h * (u[i] + u[i + 1])
    return u


def _goal_profile(spec: OcpSpec, n, h, lo, hi):
    """Minimum-energy affine control hitting the (nearest) goal state."""
    T = spec.t1 - spec.t0
    if spec.goal[0] == "point":
        thg, vg = spec.goal[1], spec.goal[2]
    else:
        (tlo, thi), (vlo, vhi) = spec.goal[1], spec.goal[2]
        thg = 0.5 * (max(tlo, -1e6) + min(thi, 1e6))
        vg = min(max(0.0, vlo), vhi)
    dv = vg - spec.v0
    dth = thg - spec.theta0 - spec.v0 * T
    d = (6.0 * dv * T - 12.0 * dth) / T ** 3
    c = dv / T - 0.5 * d * T
    times = np.linspace(0.0, T, n)
    return np.clip(c + d * times, lo, hi)


def _initial_u(spec: OcpSpec, n, h, lo, hi):
    # free-terminal segments start from the greedy cap-rider even when a warm
    # profile exists: the optimum is a vertex and SQP certifies it in one
    # step, while a merely-close start invites zigzag on the flat directions
    if spec.goal is None:
        return _greedy_profile(spec, n, h, lo, hi)
    if spec.x_init is not None:
        x = np.asarray(spec.x_init, dtype=float).reshape(-1)
        u = x[2 * n:3 * n] if x.size == 3 * n else x[:n]
        if u.size != n:
            raise ValueError("x_init must hold n_c controls or a 3*n_c nodal vector")
        return np.clip(u, lo, hi)
    return _goal_profile(spec, n, h, lo, hi)


# ---------------------------------------------------------------------------
# solver


def warm_start(spec: OcpSpec, t_prev, u_prev) -> np.ndarray:
    """Initial control profile from an earlier solve, matched by node fraction.

    States are rebuilt through the trapezoid recursion inside the solver, so
    a warm start stays defect-exact even when the horizon shifted.
    """
    n = spec.n_c
    t_prev = np.asarray(t_prev, dtype=float)
    fr_old = (t_prev - t_prev[0]) / max(t_prev[-1] - t_prev[0], 1e-300)
    u = np.interp(np.linspace(0.0, 1.0, n), fr_old, np.asarray(u_prev, dtype=float))
    return np.clip(u, -spec.u_max, spec.u_max)


def solve_segment(spec: OcpSpec, coupling: CouplingTables | None = None,
                  mode=None) -> SegmentSolution:
    """Solve one mode segment; raises on unreachable boundaries or a stuck NLP."""
    _check_reachability(spec)
    n = spec.n_c
    times = np.linspace(spec.t0, spec.t1, n)
    h = times[1] - times[0]
    if coupling is None:
        coupling = CouplingTables.identity(n)
    a_t = np.asarray(coupling.a, dtype=float)
    b_t = np.asarray(coupling.b, dtype=float)
    if a_t.size != n or b_t.size != n:
        raise ValueError("coupling tables must be sampled at the segment nodes")
    budget = coupling.power_budget
    if budget is not None:
        budget = np.maximum(np.asarray(budget, dtype=float), 0.0)

    ku, kv, ka = _node_weights(spec, times)
    wq = np.full(n, h)
    wq[0] = wq[-1] = 0.5 * h
    cu = wq * (ku - ka)
    cv = wq * kv

    S, R = _affine_maps(n, h)
    tloc = times - times[0]
    v_of = lambda u: spec.v0 + S @ u
    th_of = lambda u: spec.theta0 + tloc * spec.v0 + R @ u
    tau_of = lambda u: a_t * u + b_t

    lo, hi, src_lo, src_hi = _control_box(spec, a_t, b_t)

    soft = [c for c in spec.constraints if not c.critical]
    hard_rows = []   # (name, fun(u)->c>=0 values, jac(u)->J)
    gains = {c.name: c.gain for c in soft}

    # velocity / angle limits as linear rows (pinned first node exempt).
    # A handover above the cap (a passive phase is free to whip past it)
    # widens the bound along the fastest physically possible braking ramp.
    # Rows a segment provably cannot touch are screened out up front.
    T_seg = spec.t1 - spec.t0
    v_reach = abs(spec.v0) + T_seg * max(abs(lo).max(), abs(hi).max())
    if np.isfinite(spec.v_bounds[1]) and v_reach >= spec.v_bounds[1] - 1e-12:
        v_hi_arr = np.full(n, spec.v_bounds[1])
        if spec.v0 > spec.v_bounds[1]:
            v_hi_arr = np.maximum(v_hi_arr, spec.v0 - spec.u_max * tloc)
        hard_rows.append(("velocity", lambda u, b=v_hi_arr: b[1:] - v_of(u)[1:],
                          lambda u: -S[1:]))
    if np.isfinite(spec.v_bounds[0]) and -v_reach <= spec.v_bounds[0] + 1e-12:
        v_lo_arr = np.full(n, spec.v_bounds[0])
        if spec.v0 < spec.v_bounds[0]:
            v_lo_arr = np.minimum(v_lo_arr, spec.v0 + spec.u_max * tloc)
        hard_rows.append(("velocity", lambda u, b=v_lo_arr: v_of(u)[1:] - b[1:],
                          lambda u: S[1:]))
    if np.isfinite(spec.v_bounds[0]) and np.isfinite(spec.v_bounds[1]):
        v_env = max(abs(spec.v_bounds[0]), abs(spec.v_bounds[1]), abs(spec.v0))
    else:
        v_env = v_reach
    th_reach = T_seg * v_env
    if (np.isfinite(spec.theta_bounds[1])
            and spec.theta0 + th_reach >= spec.theta_bounds[1] - 1e-12):
        hard_rows.append(("angle", lambda u: spec.theta_bounds[1] - th_of(u)[1:],
                          lambda u: -R[1:]))
    if (np.isfinite(spec.theta_bounds[0])
            and spec.theta0 - th_reach <= spec.theta_bounds[0] + 1e-12):
        hard_rows.append(("angle", lambda u: th_of(u)[1:] - spec.theta_bounds[0],
                          lambda u: R[1:]))

    eq_rows = []     # (fun(u)->0 values, jac)
    if spec.goal is not None:
        T = spec.t1 - spec.t0
        if spec.goal[0] == "point":
            thg, vg = spec.goal[1], spec.goal[2]
            tgt = np.array([thg - spec.theta0 - spec.v0 * T, vg - spec.v0])
            Ag = np.vstack([R[-1], S[-1]])
            eq_rows.append((lambda u: Ag @ u - tgt, lambda u: Ag))
        else:
            (g_tlo, g_thi), (g_vlo, g_vhi) = spec.goal[1], spec.goal[2]
            base_th = spec.theta0 + spec.v0 * T
            if np.isfinite(g_thi):
                hard_rows.append(("goal", lambda u, b=g_thi: np.atleast_1d(b - base_th - R[-1] @ u),
                                  lambda u: -R[-1][None, :]))
            if np.isfinite(g_tlo):
                hard_rows.append(("goal", lambda u, b=g_tlo: np.atleast_1d(base_th + R[-1] @ u - b),
                                  lambda u: R[-1][None, :]))
            if np.isfinite(g_vhi):
                hard_rows.append(("goal", lambda u, b=g_vhi: np.atleast_1d(b - spec.v0 - S[-1] @ u),
                                  lambda u: -S[-1][None, :]))
            if np.isfinite(g_vlo):
                hard_rows.append(("goal", lambda u, b=g_vlo: np.atleast_1d(spec.v0 + S[-1] @ u - b),
                                  lambda u: S[-1][None, :]))

    # critical nonlinear families (power); torque criticals already in the box
    tau_abs_max = float(np.max(np.maximum(np.abs(a_t * lo + b_t),
                                          np.abs(a_t * hi + b_t))))
    for con in spec.constraints:
        if not con.critical or con.kind == "torque":
            continue
        if con.kind == "power_sys" and budget is not None:
            cap_min = float(np.min(budget))
        elif con.lower < 0.0 < con.upper:
            cap_min = min(-con.lower, con.upper)
        else:
            cap_min = -np.inf   # one-sided forcing bound, never screened
        if tau_abs_max * v_env <= 0.999 * cap_min:
            continue    # provably slack over the whole segment
        hard_rows.extend(_power_rows(con, tau_of, v_of, a_t, S, budget))

    def soft_terms(u):
        tau = tau_of(u)
        v = v_of(u)
        pen = 0.0
        grad = np.zeros(n)
        gs = []
        for con in soft:
            g = _constraint_g(con, tau, v, budget)
            gs.append(g)
            act = g > 0.0
            if not np.any(act):
                continue
            k = gains[con.name]
            pen += k * float(np.sum(g[act] * g[act]))
            coef = 2.0 * k * np.where(act, g, 0.0)
            if con.kind == "torque":
                grad += (coef[:n] - coef[n:]) * a_t
            else:
                dpu = a_t * v               # d(tau v)/du_i, diagonal part
                dpv = tau                    # d(tau v)/dv_i, through S
                e = coef[:n] - coef[n:]
                grad += e * dpu + S.T @ (e * dpv)
        return pen, grad, (np.concatenate(gs) if gs else np.zeros(0))

    def fun(u):
        v = v_of(u)
        base = float(cu @ (u * u) - cv @ (v * v))
        grad = 2.0 * cu * u - 2.0 * (S.T @ (cv * v))
        pen, pgrad, _ = soft_terms(u)
        return base + pen, grad + pgrad

    cons = []
    for _name, cf, cj in hard_rows:
        cons.append({"type": "ineq", "fun": cf, "jac": cj})
    for ef, ej in eq_rows:
        cons.append({"type": "eq", "fun": ef, "jac": ej})

    u = _initial_u(spec, n, h, lo, hi)
    violation_history = []
    res = None
    for _round in range(32):
        cand = minimize(fun, u, jac=True, method="SLSQP",
                        bounds=Bounds(lo, hi), constraints=cons,
                        options={"maxiter": spec.maxiter, "ftol": spec.ftol})
        _, _, g_soft = soft_terms(cand.x)
        V = violation_measure(g_soft)
        # keep the best-violation iterate per round so raising the gains
        # never loses ground to a wandering local solve
        if violation_history and V > violation_history[-1]:
            V = violation_history[-1]
        else:
            res, u = cand, cand.x
        if res is None:
            res, u = cand, cand.x
        violation_history.append(V)
        if not soft or V < spec.violation_tol or all(
                gains[c.name] >= spec.gain_cap for c in soft):
            break
        for c in soft:
            gains[c.name] = min(gains[c.name] * 10.0, spec.gain_cap)

    if not res.success:
        retry = minimize(fun, u, jac=True, method="SLSQP",
                         bounds=Bounds(lo, hi), constraints=cons,
                         options={"maxiter": 2 * spec.maxiter, "ftol": spec.ftol})
        if retry.success:
            res, u = retry, retry.x
        else:
            partial = _package(spec, times, h, res.x, v_of, th_of, tau_of, a_t,
                               S, lo, hi, src_lo, src_hi, hard_rows, eq_rows,
                               soft_terms, gains, budget, violation_history,
                               res, converged=False)
            raise ConvergenceError(
                f"segment NLP stopped without convergence: {res.message}",
                best=partial)

    return _package(spec, times, h, u, v_of, th_of, tau_of, a_t, S, lo, hi,
                    src_lo, src_hi, hard_rows, eq_rows, soft_terms, gains,
                    budget, violation_history, res, converged=True)


def _power_rows(con, tau_of, v_of, a_t, S, budget):
    """Hard inequality rows for the bilinear power families."""

    def p_of(u):
        return tau_of(u) * v_of(u)

    def jac_p(u):
        tau = tau_of(u)
        v = v_of(u)
        return np.diag(a_t * v) + tau[:, None] * S

    if con.kind == "power_joint":
        return [
            (con.name, lambda u: con.upper - p_of(u), lambda u: -jac_p(u)),
            (con.name, lambda u: p_of(u) - con.lower, lambda u: jac_p(u)),
        ]
    cap = budget if budget is not None else np.full(a_t.size, con.upper)
    return [
        (con.name, lambda u: cap - p_of(u), lambda u: -jac_p(u)),
        (con.name, lambda u: cap + p_of(u), lambda u: jac_p(u)),
    ]


def _constraint_g(con: SegmentConstraint, tau, v, budget):
    """Per-node constraint values with the g <= 0 feasibility convention.

    Two blocks per family: (upper side, lower side), each of length n.
    """
    if con.kind == "torque":
        return np.concatenate([tau - con.upper, con.lower - tau])
    p = tau * v
    if con.kind == "power_joint":
        return np.concatenate([p - con.upper, con.lower - p])
    cap = budget if budget is not None else np.full(tau.shape, con.upper)
    return np.concatenate([p - cap, -p - cap])


def _package(spec, times, h, u, v_of, th_of, tau_of, a_t, S, lo, hi,
             src_lo, src_hi, hard_rows, eq_rows, soft_terms, gains, budget,
             violation_history, res, converged):
    n = spec.n_c
    theta = th_of(u)
    v = v_of(u)
    tau = tau_of(u)

    wq = np.full(n, h)
    wq[0] = wq[-1] = 0.5 * h
    ku, kv, ka = _node_weights(spec, times)
    mode_cost = float(np.sum(wq * (ku * u * u - kv * v * v - ka * u * u)))

    pen, _, g_soft = soft_terms(u)
    V = violation_measure(g_soft)

    # defect residuals of the reconstructed nodal trajectory
    d1 = theta[1:] - theta[:-1] - 0.5 * h * (v[1:] + v[:-1])
    d2 = v[1:] - v[:-1] - 0.5 * h * (u[1:] + u[:-1])
    defect = float(max(np.max(np.abs(d1)), np.max(np.abs(d2))))

    stationarity = np.nan
    slackness = np.nan
    mults = {}
    if spec.diagnostics:
        stationarity, slackness, mults = _kkt_diagnostics(
            spec, times, h, u, v_of, tau_of, a_t, S, lo, hi, src_lo, src_hi,
            hard_rows, eq_rows, soft_terms)

    curvature = 2.0 * (ku - ka)
    gs = soft_terms(u)[2]
    if gs.size:
        off = 0
        for con in [c for c in spec.constraints if not c.critical]:
            g = gs[off:off + 2 * n]
            off += 2 * n
            if con.kind in ("power_joint", "power_sys"):
                act = (g[:n] > 0) | (g[n:] > 0)
                curvature = curvature + 2.0 * gains[con.name] * (a_t * v) ** 2 * act
    convex = bool(np.min(curvature) > 0.0)

    return SegmentSolution(
        t_nodes=times, theta=theta, v=v, u=u.copy(), tau=tau,
        objective=float(res.fun), mode_cost=mode_cost,
        penalty_value=float(pen), violation=V,
        violation_history=list(violation_history),
        defect_residual=defect,
        stationarity_residual=float(stationarity),
        slackness_residual=float(slackness),
        hessian_convex=convex, multipliers=mults,
        n_iter=int(getattr(res, "nit", 0)), converged=converged,
        message=str(getattr(res, "message", "")), label=spec.label)


def _kkt_diagnostics(spec, times, h, u, v_of, tau_of, a_t, S, lo, hi,
                     src_lo, src_hi, hard_rows, eq_rows, soft_terms):
    """Multiplier recovery by least squares on the reduced KKT system.

    Negative inequality multipliers are clipped to keep dual feasibility; the
    stationarity residual is recomputed after the clip and measured on the
    unsaturated control nodes only.
    """
    n = spec.n_c
    wq = np.full(n, h)
    wq[0] = wq[-1] = 0.5 * h
    ku, kv, ka = _node_weights(spec, times)
    v = v_of(u)
    grad = 2.0 * wq * (ku - ka) * u - 2.0 * (S.T @ (wq * kv * v))
    grad += soft_terms(u)[1]

    tol_b = 1e-8
    tol_act = 1e-6

    act_rows = []
    act_slack = []
    names = []
    for i in np.where(u - lo <= tol_b)[0]:
        e = np.zeros(n)
        e[i] = 1.0
        act_rows.append(e)
        act_slack.append(float(u[i] - lo[i]))
        names.append("torque" if src_lo[i] else "control")
    for i in np.where(hi - u <= tol_b)[0]:
        e = np.zeros(n)
        e[i] = -1.0
        act_rows.append(e)
        act_slack.append(float(hi[i] - u[i]))
        names.append("torque" if src_hi[i] else "control")

    for name, cf, cj in hard_rows:
        cvals = np.atleast_1d(cf(u))
        J = np.atleast_2d(cj(u))
        for i in np.where(cvals <= tol_act)[0]:
            act_rows.append(J[i])
            act_slack.append(float(cvals[i]))
            names.append(name)

    free_rows = [np.atleast_2d(ej(u)) for _ef, ej in eq_rows]
    A_free = np.vstack(free_rows) if free_rows else np.zeros((0, n))
    A_act = np.vstack(act_rows) if act_rows else np.zeros((0, n))

    blocks = []
    if A_free.size:
        blocks.append(A_free.T)
    if A_act.size:
        blocks.append(A_act.T)
    if not blocks:
        interior = (u - lo > tol_b) & (hi - u > tol_b)
        stat = float(np.max(np.abs(grad[interior]))) if np.any(interior) else 0.0
        return stat, 0.0, {}

    A = np.hstack(blocks)
    sol, *_ = np.linalg.lstsq(A, grad, rcond=None)
    n_free = A_free.shape[0]
    lam = sol[:n_free]
    mu = np.maximum(sol[n_free:], 0.0)
    resid = grad.copy()
    if A_free.size:
        resid -= A_free.T @ lam
    if A_act.size:
        resid -= A_act.T @ mu

    interior = (u - lo > tol_b) & (hi - u > tol_b)
    stationarity = float(np.max(np.abs(resid[interior]))) if np.any(interior) else 0.0

    slack = 0.0
    mults = {}
    for m, s, name in zip(mu, act_slack, names):
        slack = max(slack, abs(m * s))
        mults[name] = max(mults.get(name, 0.0), float(m))
    return stationarity, slack, mults
