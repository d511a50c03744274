"""Hybrid RF/optical IoT transmission scheduling with Age-of-Information metrics."""

__version__ = "0.1.0"

from .aoi import AoIMetrics, AoITrajectory, StreamKey, aoi_trajectory, mean_aoi, peak_aoi, system_metrics
from .milp import LinearModel, build_milp, induced_assignment
from .model import (
    ConstraintId,
    FeasibilityReport,
    InfeasibleScheduleError,
    ObjectiveBreakdown,
    ObjectiveConfig,
    Schedule,
    check_constraints,
    derive_endogenous,
    evaluate_schedule,
    load_schedule,
    save_schedule,
)
from .scenario import (
    GenerationConfig,
    Message,
    Scenario,
    ScenarioError,
    Technology,
    generate_scenario,
    load_scenario,
    save_scenario,
)
from .solver import Proof, Solution, SolverOptions, solve, solve_bnb, solve_bruteforce, solve_greedy
