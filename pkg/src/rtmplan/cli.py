"""Command-line front end: plan / evaluate / baseline / sweep.

Outputs are a trajectory CSV (one block of theta, theta_dot, theta_ddot,
tau per joint plus a combined per-joint mode-letter column) and a JSON
report with the matrix, score, schedule, diagnostics, baseline ratios and
the power curve.  Identical config and seed give byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .dynamics import Trajectory, inverse_dynamics_batch
from .errors import ConfigError, PlanningError
from .kernels import BACKEND, rk4_compliance
from .planner import (EvalOutcome, PlanResult, dense_oracle, evaluate_motion,
                      make_baselines, optimize_T, performance_ratio,
                      synchronous_matrix)
from .scenarios import Scenario, builtin, load_scenario
from .schedule import ResponseTimeMatrix


def _parser():
    p = argparse.ArgumentParser(prog="rtmplan",
                                description="response-time-matrix motion planner")
    p.add_argument("--version", action="version", version=f"rtmplan {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", help="built-in scenario name")
        sp.add_argument("--config", help="scenario TOML file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--format", choices=["csv"], default="csv")

    sp = sub.add_parser("plan", help="search for an optimized response-time matrix")
    common(sp)
    sp.add_argument("--budget", type=int, help="evaluation budget override")
    sp.add_argument("--restarts", type=int, help="restart count override")
    sp.add_argument("--skip-baselines", action="store_true",
                    help="omit the synchronous/oracle comparison")

    sp = sub.add_parser("evaluate", help="score a user-supplied matrix")
    common(sp)
    sp.add_argument("--matrix", required=True,
                    help="inline matrix, rows ';'-separated: '0.1,0.3,0.9;0,0.2,0.9'")

    sp = sub.add_parser("baseline", help="emit the synchronous and oracle plans")
    common(sp)

    sp = sub.add_parser("sweep", help="compliance stiffness/damping monotonicity table")
    common(sp)
    sp.add_argument("--joint", type=int, default=0)
    return p


def _load(args) -> Scenario:
    if bool(args.scenario) == bool(args.config):
        raise ConfigError("give exactly one of --scenario or --config")
    return builtin(args.scenario) if args.scenario else load_scenario(args.config)


def _parse_matrix(text: str, scenario: Scenario) -> ResponseTimeMatrix:
    try:
        rows = [[float(v) for v in row.split(",")] for row in text.split(";")]
        times = np.asarray(rows, dtype=float)
    except ValueError as e:
        raise ConfigError(f"cannot parse --matrix: {e}") from None
    return ResponseTimeMatrix(times, scenario.template.initial_modes,
                              horizon=scenario.template.horizon)


def _fmt(x) -> str:
    return repr(float(x))


def write_trajectory_csv(path, traj: Trajectory):
    n = traj.n_joints
    cols = ["t"]
    for k in range(n):
        cols += [f"j{k}_theta", f"j{k}_theta_dot", f"j{k}_theta_ddot", f"j{k}_tau"]
    cols.append("modes")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(traj.t.size):
            row = [_fmt(traj.t[i])]
            for k in range(n):
                row += [_fmt(traj.theta[i, k]), _fmt(traj.theta_dot[i, k]),
                        _fmt(traj.theta_ddot[i, k]), _fmt(traj.tau[i, k])]
            row.append("".join(traj.modes[i]))
            fh.write(",".join(row) + "\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not np.isfinite(x):
        return repr(x)
    return x


def _power_curve(traj: Trajectory, max_points=200):
    p = traj.power()
    step = max(1, int(np.ceil(p.size / max_points)))
    idx = list(range(0, p.size, step))
    if idx[-1] != p.size - 1:
        idx.append(p.size - 1)
    return {"peak": float(p.max()),
            "curve": [[float(traj.t[i]), float(p[i])] for i in idx]}


def _schedule_block(out: EvalOutcome):
    sched = out.schedule
    if sched is None:
        return None
    return {
        "t_f": sched.t_f,
        "intervals": [[[s.start, s.stop, s.mode.letter] for s in sched.intervals[k]]
                      for k in range(sched.n_joints)],
        "first_activation": [sched.first_activation(k) for k in range(sched.n_joints)],
        "toggles": [list(sched.toggle_times(k)) for k in range(sched.n_joints)],
    }


def _diagnostics_block(out: EvalOutcome):
    return {
        "feasible": out.feasible,
        "violation_critical": out.violation_critical,
        "violation_soft": out.violation_soft,
        "penalty_total": out.penalty_total,
        "failure": out.failure,
        "segments": [{
            "label": s.label, "converged": s.converged,
            "defect_residual": s.defect_residual,
            "stationarity_residual": s.stationarity_residual,
            "slackness_residual": s.slackness_residual,
            "violation": s.violation, "convex": s.hessian_convex,
            "iterations": s.n_iter,
        } for s in out.segments],
    }


def _eval_block(out: EvalOutcome):
    block = {
        "matrix": out.matrix.times.tolist(),
        "initial_modes": [m.letter for m in out.matrix.initial_modes],
        "score": out.score,
        "task_value": out.task_value,
        "task_terms": out.task_terms,
        "schedule": _schedule_block(out),
        "diagnostics": _diagnostics_block(out),
    }
    if out.throw is not None:
        t = out.throw
        block["throw"] = {"speed": t.speed, "angle": t.angle, "height": t.height,
                          "flight_time": t.flight_time, "range": t.range,
                          "feasible": t.feasible}
    if out.trajectory is not None:
        block["power"] = _power_curve(out.trajectory)
    return block


def _write_report(path, payload):
    with open(path, "w", newline="") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _baseline_block(scenario, plan: PlanResult | None, baselines: dict):
    sync = baselines.get("synchronous")
    oracle = baselines.get("oracle")
    block = {}
    if sync is not None:
        block["synchronous"] = {
            "task_value": sync.task_value,
            "feasible": sync.feasible,
            "peak_power": float(sync.trajectory.power().max())
            if sync.trajectory is not None else None,
        }
    if oracle is not None:
        block["oracle"] = {"task_value": oracle.task_value,
                           "converged": oracle.converged,
                           "message": oracle.message}
    else:
        block["oracle"] = None
        if "oracle_failure" in baselines:
            block["oracle_failure"] = baselines["oracle_failure"]
    if plan is not None and sync is not None and sync.task_value:
        block["ratio_synchronous"] = performance_ratio(
            scenario, plan.task_value, sync.task_value)
    if plan is not None and oracle is not None and oracle.converged:
        block["ratio_oracle"] = performance_ratio(
            scenario, plan.task_value, oracle.task_value)
    return block


def _cmd_plan(args, scenario: Scenario):
    plan = optimize_T(scenario, budget=args.budget, seed=args.seed,
                      restarts=args.restarts)
    trace = []
    last = None
    for i, s in plan.trace:
        if last is None or s > last or i == plan.trace[-1][0]:
            trace.append([i, s])
            last = s
    payload = {
        "command": "plan",
        "scenario": scenario.name,
        "backend": BACKEND,
        "seed": args.seed,
        "budget": args.budget if args.budget is not None else scenario.budget,
        "n_evaluations": plan.n_evaluations,
        "duration_s": plan.duration_s,
        "trace": trace,
    }
    payload.update(_eval_block(plan.outcome))
    if not args.skip_baselines:
        baselines = make_baselines(scenario, horizon=plan.outcome.schedule.t_f,
                                   warm=plan)
        payload["baselines"] = _baseline_block(scenario, plan, baselines)
    write_trajectory_csv(os.path.join(args.out, "trajectory.csv"), plan.trajectory)
    _write_report(os.path.join(args.out, "report.json"), payload)
    return 0


def _cmd_evaluate(args, scenario: Scenario):
    T = _parse_matrix(args.matrix, scenario)
    out = evaluate_motion(T, scenario, resolution=scenario.dt, diagnostics=True)
    if out.failure and out.failure.startswith("schedule:"):
        # malformed matrices surface as config errors with the exact cause
        raise ConfigError(out.failure)
    payload = {"command": "evaluate", "scenario": scenario.name,
               "backend": BACKEND, "seed": args.seed}
    payload.update(_eval_block(out))
    if out.trajectory is not None:
        write_trajectory_csv(os.path.join(args.out, "trajectory.csv"), out.trajectory)
    _write_report(os.path.join(args.out, "report.json"), payload)
    return 0 if out.feasible else 3


def _cmd_baseline(args, scenario: Scenario):
    baselines = make_baselines(scenario)
    sync = baselines["synchronous"]
    payload = {"command": "baseline", "scenario": scenario.name,
               "backend": BACKEND,
               "synchronous": _eval_block(sync),
               "baselines": _baseline_block(scenario, None, baselines)}
    if sync.trajectory is not None:
        write_trajectory_csv(os.path.join(args.out, "sync_trajectory.csv"),
                             sync.trajectory)
    oracle = baselines.get("oracle")
    if oracle is not None:
        with open(os.path.join(args.out, "oracle_nodes.csv"), "w", newline="") as fh:
            n = oracle.theta.shape[1]
            cols = ["t"] + [f"j{k}_{q}" for k in range(n)
                            for q in ("theta", "theta_dot", "u", "tau")]
            fh.write(",".join(cols) + "\n")
            for i in range(oracle.t_nodes.size):
                row = [_fmt(oracle.t_nodes[i])]
                for k in range(n):
                    row += [_fmt(oracle.theta[i, k]), _fmt(oracle.theta_dot[i, k]),
                            _fmt(oracle.u[i, k]), _fmt(oracle.tau[i, k])]
                fh.write(",".join(row) + "\n")
    _write_report(os.path.join(args.out, "report.json"), payload)
    return 0 if sync.feasible else 3


def compliance_sweep(scenario: Scenario, joint: int = 0, n_points: int = 5,
                     duration: float = 3.0, dt: float = 1e-3):
    """Peak deviation / tracking response under scaled stiffness and damping.

    The disturbance is a step at the holding torque of the initial pose, so
    rows are comparable across scales.  Returns a list of row dicts.
    """
    model = scenario.model
    comp = scenario.compliance
    tau0 = inverse_dynamics_batch(
        model, scenario.theta0[None, :], np.zeros((1, model.n_joints)),
        np.zeros((1, model.n_joints)))[0, joint]
    if tau0 == 0.0:
        tau0 = 1.0
    t = np.arange(0.0, duration + dt / 2, dt)
    drive = np.full(t.size, float(tau0))
    scales = np.array([0.5, 0.75, 1.0, 1.5, 2.25])[:n_points]
    rows = []
    for kind in ("stiffness", "damping"):
        for sc in scales:
            B = float(comp.inertia[joint])
            D = float(comp.damping[joint])
            K = float(comp.stiffness[joint])
            if kind == "stiffness":
                K *= sc
            else:
                D *= sc
            dev, devd, _ = rk4_compliance(B, D, K, t, drive, 0.0, 0.0)
            rows.append({
                "kind": kind, "scale": float(sc),
                "stiffness": K, "damping": D, "inertia": B,
                "peak_angle_dev": float(np.abs(dev).max()),
                "peak_rate_dev": float(np.abs(devd).max()),
                "steady_dev": float(dev[-1]),
            })
    return rows


def _cmd_sweep(args, scenario: Scenario):
    rows = compliance_sweep(scenario, joint=args.joint)
    path = os.path.join(args.out, "sweep.csv")
    cols = ["kind", "scale", "stiffness", "damping", "inertia",
            "peak_angle_dev", "peak_rate_dev", "steady_dev"]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(r[c] if isinstance(r[c], str) else _fmt(r[c])
                              for c in cols) + "\n")
    _write_report(os.path.join(args.out, "report.json"),
                  {"command": "sweep", "scenario": scenario.name,
                   "joint": args.joint, "rows": rows})
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    workers = os.environ.get("RTMPLAN_WORKERS")
    if workers is not None:
        try:
            if int(workers) < 1:
                raise ValueError
        except ValueError:
            print("error: RTMPLAN_WORKERS must be a positive integer", file=sys.stderr)
            return 2
    try:
        scenario = _load(args)
        os.makedirs(args.out, exist_ok=True)
        handler = {"plan": _cmd_plan, "evaluate": _cmd_evaluate,
                   "baseline": _cmd_baseline, "sweep": _cmd_sweep}[args.command]
        return handler(args, scenario)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except PlanningError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return 3
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
