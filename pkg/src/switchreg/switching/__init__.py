"""Two-mode optimal switching systems on a rectangle."""

from .analysis import LABEL_NAMES, ResidualReport, SetPartition, partition_sets, residual_report
from .pair import SolutionPair, read_pair_csv, write_pair_csv
from .penalty import PenaltyFunction
from .problem import ProblemSpec, SampledData, ValidationReport, example2_spec, validate_spec
from .solvers import (
    ContinuationError,
    JacobianSingularError,
    SolverConfig,
    constraint_violation,
    construct_nonminimal,
    continuation_solve,
    epsilon_sweep,
    solve_minimal,
    solve_penalized,
)

__all__ = [
    "LABEL_NAMES", "ResidualReport", "SetPartition", "partition_sets", "residual_report",
    "SolutionPair", "read_pair_csv", "write_pair_csv", "PenaltyFunction", "ProblemSpec",
    "SampledData", "ValidationReport", "example2_spec", "validate_spec", "ContinuationError",
    "JacobianSingularError", "SolverConfig", "constraint_violation", "construct_nonminimal",
    "continuation_solve", "epsilon_sweep", "solve_minimal", "solve_penalized",
]
