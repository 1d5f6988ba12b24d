"""Multilevel Picard approximation for semilinear PIDEs with jumps."""
from .cost import CostLedger, closed_bound, merge, recursion_cost
from .levy import LevyMeasure, UniformCubeMeasure, make_measure
from .mlp import (
    AssumptionConstants,
    MLPConfig,
    PIDEProblem,
    RunStats,
    mlp_estimate,
    run_experiment,
    sample_eval_time,
)
from .problems import (
    VasicekJumpParams,
    linear_probe_problem,
    linear_probe_solution,
    payoff,
    vasicek_problem,
)
from .randomness import StreamKey, child, gauss_vector, uniform01
from .sde import CoefficientSet, EulerConfig, euler_step, grid_time, simulate

__version__ = "0.1.0"
