"""Response-time-matrix motion planning for planar serial chains."""

from .dynamics import (
    ChainModel,
    ComplianceParams,
    JointState,
    Trajectory,
    compliant_response,
    forward_dynamics,
    integrate,
    inverse_dynamics,
    mass_matrix,
    total_power,
)
from .schedule import JointMode, ModeSchedule, ResponseTimeMatrix, parameterize, unparameterize, validate
from .cost import CostWeights, ThrowOutcome, flight_time, segment_cost, throw_objective, weights_for_mode
from .ocp import OcpSpec, SegmentSolution, augmented_hamiltonian, penalty, solve_segment, violation_measure
from .planner import PlanResult, evaluate_motion, make_baselines, optimize_T
from .scenarios import Scenario, load_scenario, standing_scenario, throwing_scenario, toy_scenarios

__version__ = "0.1.0"

__all__ = [
    "ChainModel", "ComplianceParams", "JointState", "Trajectory",
    "compliant_response", "forward_dynamics", "integrate", "inverse_dynamics",
    "mass_matrix", "total_power",
    "JointMode", "ModeSchedule", "ResponseTimeMatrix", "parameterize",
    "unparameterize", "validate",
    "CostWeights", "ThrowOutcome", "flight_time", "segment_cost",
    "throw_objective", "weights_for_mode",
    "OcpSpec", "SegmentSolution", "augmented_hamiltonian", "penalty",
    "solve_segment", "violation_measure",
    "PlanResult", "evaluate_motion", "make_baselines", "optimize_T",
    "Scenario", "load_scenario", "standing_scenario", "throwing_scenario",
    "toy_scenarios",
]
