"""Built-in task fixtures and the scenario config format.

A scenario bundles the chain model, initial state, schedule template, cost
weight tables, constraint policies, compliance parameters and search
settings.  The same structure loads from a TOML file (the CLI's --config),
so the built-ins double as schema documentation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .cost import CostWeights
from .dynamics import ChainModel, ComplianceParams
from .errors import ConfigError
from .schedule import JointMode, ResponseTimeMatrix


@dataclass(frozen=True)
class ConstraintPolicy:
    """Which constraint family applies and how strictly."""

    kind: str                 # 'torque' | 'power_sys' | 'power_joint'
    critical: bool = True
    gain: float = 100.0

    def __post_init__(self):
        if self.kind not in ("torque", "power_sys", "power_joint"):
            raise ConfigError(f"unknown constraint kind {self.kind!r}")
        if self.gain <= 0:
            raise ConfigError("constraint gain must be positive")


@dataclass(frozen=True)
class JointGoal:
    """Terminal box for one joint, enforced on its last active segment."""

    joint: int
    theta: tuple
    theta_dot: tuple

    def __post_init__(self):
        if not (self.theta[0] <= self.theta[1] and self.theta_dot[0] <= self.theta_dot[1]):
            raise ConfigError("goal boxes need lo <= hi")


@dataclass
class Scenario:
    name: str
    model: ChainModel
    theta0: np.ndarray
    theta_dot0: np.ndarray
    template: ResponseTimeMatrix
    objective: str            # 'throw_range' | 'terminal_time_torque' | 'terminal_speed'
    weights: dict             # JointMode -> CostWeights
    compliance: ComplianceParams
    u_max: np.ndarray
    v_max: np.ndarray
    directions: np.ndarray
    constraints: tuple = ()
    goals: tuple = ()
    objective_params: dict = field(default_factory=dict)
    blend: float = 0.05
    dt: float = 1e-3
    ocp_nodes: int = 30
    transition_nodes: int = 8
    coupling_points: int = 257
    sweeps: int = 2
    budget: int = 500
    restarts: int = 5
    jitter: float = 0.3

    def goal_for(self, joint: int):
        for g in self.goals:
            if g.joint == joint:
                return g
        return None

    def weight_table(self) -> dict:
        return dict(self.weights)


_OBJECTIVES = ("throw_range", "terminal_time_torque", "terminal_speed")


def validate_scenario(s: Scenario) -> Scenario:
    n = s.model.n_joints
    s.theta0 = np.asarray(s.theta0, dtype=float).reshape(-1)
    s.theta_dot0 = np.asarray(s.theta_dot0, dtype=float).reshape(-1)
    s.u_max = np.asarray(s.u_max, dtype=float).reshape(-1)
    s.v_max = np.asarray(s.v_max, dtype=float).reshape(-1)
    if s.v_max.size == 1 and n > 1:
        s.v_max = np.full(n, s.v_max[0])
    s.directions = np.asarray(s.directions, dtype=float).reshape(-1)
    if s.objective not in _OBJECTIVES:
        raise ConfigError(f"objective must be one of {_OBJECTIVES}")
    if s.objective == "throw_range" and n != 2:
        raise ConfigError("throw_range needs a two-joint chain")
    for arr, name in ((s.theta0, "theta0"), (s.theta_dot0, "theta_dot0"),
                      (s.u_max, "u_max"), (s.v_max, "v_max"),
                      (s.directions, "directions")):
        if arr.size != n:
            raise ConfigError(f"{name} must have one entry per joint ({n})")
    if np.any(s.u_max <= 0) or np.any(s.v_max <= 0):
        raise ConfigError("u_max and v_max entries must be positive")
    if s.template.n_joints != n:
        raise ConfigError("schedule template rows must match the joint count")
    if s.compliance.inertia.size != n:
        raise ConfigError("compliance needs one triple per joint")
    for mode in (JointMode.ACTIVE, JointMode.PASSIVE):
        if mode not in s.weights:
            raise ConfigError(f"weight table missing {mode.name.lower()} triple")
    kinds = [c.kind for c in s.constraints]
    if len(kinds) != len(set(kinds)):
        raise ConfigError("duplicate constraint kind")
    for g in s.goals:
        if not 0 <= g.joint < n:
            raise ConfigError(f"goal references joint {g.joint} outside 0..{n - 1}")
    if not (s.blend >= 0 and s.dt > 0 and s.ocp_nodes >= 3 and s.sweeps >= 1
            and s.budget >= 1 and s.restarts >= 1 and s.coupling_points >= 16):
        raise ConfigError("invalid numeric scenario setting")
    return s


# ---------------------------------------------------------------------------
# built-ins


def throwing_scenario() -> Scenario:
    """Two-link desk-scale throw: shoulder (long, heavy) plus wrist.

    Platform-style limits: 350 W system power cap and a 3.14 rad/s joint
    speed limit.  Link geometry and inertia are repo-pinned working values,
    not measurements.
    """
    model = ChainModel(
        lengths=[0.6, 0.3], masses=[2.0, 1.0], com_offsets=[0.3, 0.15],
        inertias=[0.06, 0.0075], gravity=9.81,
        theta_min=[-2.8, -2.8], theta_max=[2.8, 2.8],
        tau_min=[-60.0, -25.0], tau_max=[60.0, 25.0],
        power_sys=350.0,
    )
    # symmetric start: both joints share the same slot times so any
    # proximal-distal staggering has to come out of the search itself
    template = ResponseTimeMatrix(
        np.array([[0.45, 0.90, 1.0], [0.45, 0.90, 1.0]]),
        ("passive", "passive"))
    return validate_scenario(Scenario(
        name="throwing",
        model=model,
        theta0=np.zeros(2),
        theta_dot0=np.zeros(2),
        template=template,
        objective="throw_range",
        weights={JointMode.ACTIVE: CostWeights(1.0, 4.0, 1.0),
                 JointMode.PASSIVE: CostWeights(5.0, 0.1, 0.1)},
        compliance=ComplianceParams(inertia=[1.2, 0.3], damping=[5.0, 1.2],
                                    stiffness=[12.0, 2.5]),
        u_max=np.array([12.0, 40.0]),
        v_max=np.array([3.14, 3.14]),
        directions=np.array([1.0, 1.0]),
        constraints=(ConstraintPolicy("torque", critical=True),
                     ConstraintPolicy("power_sys", critical=True)),
    ))


def standing_scenario() -> Scenario:
    """Three-joint (leg-hip-waist) stand-up with a passive buffering waist.

    The waist stays passive over the whole horizon around a frozen
    reference; leg and hip drive the posture into the goal box.  Mass is
    roughly 80 kg across the three links; hip torque capped at 200 N·m and
    the leg at 800 N·m (a force limit through a unit moment arm).
    """
    model = ChainModel(
        lengths=[0.8, 0.5, 0.5], masses=[35.0, 25.0, 20.0],
        com_offsets=[0.4, 0.25, 0.25], inertias=[1.87, 0.52, 0.42],
        gravity=9.81,
        theta_min=[0.2, -2.2, -1.5], theta_max=[2.2, 1.2, 1.5],
        tau_min=[-800.0, -200.0, -200.0], tau_max=[800.0, 200.0, 200.0],
    )
    eps = 1e-3
    template = ResponseTimeMatrix(
        np.array([[0.6, 0.0, 3.0], [eps, 0.0, 3.0], [0.0, 0.0, 3.0]]),
        ("passive", "passive", "passive"))
    return validate_scenario(Scenario(
        name="standing",
        model=model,
        theta0=np.array([1.15, -0.65, 0.40]),
        theta_dot0=np.zeros(3),
        template=template,
        objective="terminal_time_torque",
        weights={JointMode.ACTIVE: CostWeights(1.0, 0.02, 0.0),
                 JointMode.PASSIVE: CostWeights(5.0, 0.1, 0.1)},
        compliance=ComplianceParams(inertia=[50.0, 10.0, 3.0],
                                    damping=[300.0, 100.0, 40.0],
                                    stiffness=[2000.0, 600.0, 300.0]),
        u_max=np.array([4.0, 5.0, 4.0]),
        v_max=np.array([2.0, 2.0, 2.0]),
        directions=np.array([1.0, 1.0, 1.0]),
        constraints=(ConstraintPolicy("torque", critical=True),),
        goals=(JointGoal(0, (1.5408, 1.6008), (-0.15, 0.15)),
               JointGoal(1, (-0.03, 0.03), (-0.15, 0.15))),
        objective_params={"time_weight": 20.0, "torque_weight": 1e-3,
                          "goal_weight": 1e4},
    ))


def toy_scenarios() -> dict:
    """Small fixtures with independently checkable optima."""
    out = {}

    # 1-joint rest-to-rest: pure minimum-energy reach, active whole horizon
    m1 = ChainModel(lengths=[1.0], masses=[1.0], com_offsets=[0.0],
                    inertias=[1.0], gravity=0.0)
    out["toy-rest-to-rest"] = validate_scenario(Scenario(
        name="toy-rest-to-rest",
        model=m1,
        theta0=np.zeros(1), theta_dot0=np.zeros(1),
        template=ResponseTimeMatrix(np.array([[1.0]]), ("active",)),
        objective="terminal_time_torque",
        weights={JointMode.ACTIVE: CostWeights(1.0, 0.0, 0.0),
                 JointMode.PASSIVE: CostWeights(5.0, 0.1, 0.1)},
        compliance=ComplianceParams(inertia=[1.0], damping=[1.0], stiffness=[10.0]),
        u_max=np.array([50.0]),
        v_max=np.array([10.0]),
        directions=np.array([1.0]),
        goals=(JointGoal(0, (0.999, 1.001), (-0.001, 0.001)),),
        objective_params={"time_weight": 0.0, "torque_weight": 1.0,
                          "goal_weight": 1e4},
        budget=50, restarts=2,
    ))

    # 1-joint swing pump: passive spring swing, activate at the right phase
    m2 = ChainModel(lengths=[0.6], masses=[1.0], com_offsets=[0.3],
                    inertias=[0.03], gravity=9.81,
                    theta_min=[-6.0], theta_max=[6.0])
    out["toy-switch"] = validate_scenario(Scenario(
        name="toy-switch",
        model=m2,
        theta0=np.zeros(1), theta_dot0=np.zeros(1),
        template=ResponseTimeMatrix(np.array([[0.3]]), ("passive",), horizon=1.0),
        objective="terminal_speed",
        weights={JointMode.ACTIVE: CostWeights(1.0, 4.0, 1.0),
                 JointMode.PASSIVE: CostWeights(5.0, 0.1, 0.1)},
        compliance=ComplianceParams(inertia=[0.2], damping=[0.02], stiffness=[8.0]),
        u_max=np.array([1.5]),
        v_max=np.array([10.0]),
        directions=np.array([-1.0]),
        objective_params={"direction": -1.0},
        budget=120, restarts=3,
    ))

    # 2-joint zero-gravity chain: stays at rest under an all-zero matrix
    m3 = ChainModel(lengths=[1.0, 1.0], masses=[1.0, 1.0],
                    com_offsets=[0.5, 0.5], inertias=[1 / 12, 1 / 12], gravity=0.0)
    out["toy-zero-g"] = validate_scenario(Scenario(
        name="toy-zero-g",
        model=m3,
        theta0=np.zeros(2), theta_dot0=np.zeros(2),
        template=ResponseTimeMatrix(np.zeros((2, 2)), ("passive", "passive"),
                                    horizon=1.0),
        objective="terminal_speed",
        weights={JointMode.ACTIVE: CostWeights(1.0, 4.0, 1.0),
                 JointMode.PASSIVE: CostWeights(5.0, 0.1, 0.1)},
        compliance=ComplianceParams(inertia=[0.2, 0.2], damping=[0.5, 0.5],
                                    stiffness=[5.0, 5.0]),
        u_max=np.array([10.0, 10.0]),
        v_max=np.array([10.0, 10.0]),
        directions=np.array([1.0, 1.0]),
        budget=20, restarts=1,
    ))
    return out


_BUILTINS = {"throwing": throwing_scenario, "standing": standing_scenario}


def builtin(name: str) -> Scenario:
    if name in _BUILTINS:
        return _BUILTINS[name]()
    toys = toy_scenarios()
    if name in toys:
        return toys[name]
    known = sorted(list(_BUILTINS) + list(toys))
    raise ConfigError(f"unknown scenario {name!r}; built-ins: {', '.join(known)}")


# ---------------------------------------------------------------------------
# config files


def scenario_from_dict(cfg: dict) -> Scenario:
    try:
        meta = cfg["scenario"]
        mdl = cfg["model"]
        init = cfg["initial"]
        mat = cfg["matrix"]
        wt = cfg["weights"]
        comp = cfg["compliance"]
        lim = cfg["limits"]
    except KeyError as e:
        raise ConfigError(f"config missing required section {e}") from None

    model = ChainModel(
        lengths=mdl["lengths"], masses=mdl["masses"],
        com_offsets=mdl["com_offsets"], inertias=mdl["inertias"],
        gravity=mdl.get("gravity", 9.81),
        theta_min=mdl.get("theta_min"), theta_max=mdl.get("theta_max"),
        tau_min=mdl.get("tau_min"), tau_max=mdl.get("tau_max"),
        power_min=mdl.get("power_min"), power_max=mdl.get("power_max"),
        power_sys=mdl.get("power_sys", np.inf),
    )
    template = ResponseTimeMatrix(
        np.asarray(mat["times"], dtype=float),
        tuple(init["modes"]),
        horizon=mat.get("horizon"),
    )
    weights = {}
    for key, mode in (("active", JointMode.ACTIVE), ("passive", JointMode.PASSIVE),
                      ("transition", JointMode.TRANSITION)):
        if key in wt:
            w = wt[key]
            weights[mode] = CostWeights(w["k_u"], w["k_v"], w["k_a"])
    compliance = ComplianceParams(inertia=comp["inertia"], damping=comp["damping"],
                                  stiffness=comp["stiffness"])
    constraints = tuple(
        ConstraintPolicy(c["kind"], bool(c.get("critical", True)),
                         float(c.get("gain", 100.0)))
        for c in cfg.get("constraints", ()))
    goals = tuple(
        JointGoal(int(g["joint"]), tuple(g["theta"]), tuple(g["theta_dot"]))
        for g in cfg.get("goals", ()))
    search = cfg.get("search", {})

    scenario = Scenario(
        name=str(meta.get("name", "scenario")),
        model=model,
        theta0=np.asarray(init["theta"], dtype=float),
        theta_dot0=np.asarray(init["theta_dot"], dtype=float),
        template=template,
        objective=meta["objective"],
        weights=weights,
        compliance=compliance,
        u_max=np.asarray(lim["u_max"], dtype=float),
        v_max=np.asarray(lim.get("v_max", np.full(model.n_joints, np.inf)), dtype=float),
        directions=np.asarray(lim.get("directions", np.ones(model.n_joints)), dtype=float),
        constraints=constraints,
        goals=goals,
        objective_params=dict(cfg.get("objective_params", {})),
        blend=float(meta.get("blend", 0.05)),
        dt=float(meta.get("dt", 1e-3)),
        ocp_nodes=int(search.get("ocp_nodes", 30)),
        transition_nodes=int(search.get("transition_nodes", 8)),
        coupling_points=int(search.get("coupling_points", 257)),
        sweeps=int(search.get("sweeps", 2)),
        budget=int(search.get("budget", 500)),
        restarts=int(search.get("restarts", 5)),
        jitter=float(search.get("jitter", 0.3)),
    )
    return validate_scenario(scenario)


def load_scenario(path) -> Scenario:
    """Read a scenario from a TOML config file."""
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config parse error: {e}") from None
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    return scenario_from_dict(cfg)
