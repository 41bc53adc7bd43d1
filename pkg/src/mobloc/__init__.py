"""Range-free localization with a multi-power mobile anchor."""

from .beaconing import (AnnulusConstraint, ObservationLog, TrajectoryConfig, extract_constraints,
                        generate_trajectory, simulate_beaconing)
from .geometry import ObstaclePolygon, Point2D, SensorNode, auto_flag_boundary, segment_blocked
from .harness import (ExperimentConfig, TrialResult, baseline_estimate, normalized_error, run_sweep,
                      run_trial)
from .radio import IrregularRangeTable, RadioConfig, build_range_table, can_hear
from .relay import ContentionConfig, RelayEvent, backoff_delay, relayed_constraint, run_contention
from .scenario import ScenarioConfig, load_scenario, default_setup, write_scenario
from .solver import (NotLocalizable, RelaxedProblem, SolveResult, SolverConfig, estimate_position,
                     objective_eq4, objective_eq5, oracle_grid, solve_relaxation)

__all__ = [
    "AnnulusConstraint", "ObservationLog", "TrajectoryConfig", "extract_constraints",
    "generate_trajectory", "simulate_beaconing", "ObstaclePolygon", "Point2D", "SensorNode",
    "auto_flag_boundary", "segment_blocked", "ExperimentConfig", "TrialResult", "baseline_estimate",
    "normalized_error", "run_sweep", "run_trial", "IrregularRangeTable", "RadioConfig",
    "build_range_table", "can_hear", "ContentionConfig", "RelayEvent", "backoff_delay",
    "relayed_constraint", "run_contention", "ScenarioConfig", "load_scenario", "default_setup",
    "write_scenario", "NotLocalizable", "RelaxedProblem", "SolveResult", "SolverConfig",
    "estimate_position", "objective_eq4", "objective_eq5", "oracle_grid", "solve_relaxation",
]
