"""Piecewise-constant loops, occupation fields, and loop metrics."""

from .discretize import (
    ConvergenceReport,
    ConvergenceRow,
    Partition,
    TimeChange,
    build_partition,
    circular_sup_distance,
    convergence_experiment,
    finite_partition,
    induced_discrete_loop,
    trace_time_change,
    verify_trace_identity,
)
from .errors import (
    ConstructionError,
    DomainError,
    LoopfieldError,
    ReconstructionError,
    ValidationError,
)
from .loops import (
    BasedLoop,
    EquivalenceReport,
    Loop,
    Segment,
    based_segments,
    canonical_based,
    canonical_shift,
    equals_up_to_rotation,
    evaluate,
    generate_random_loop,
    normalize,
    random_based_loop,
    rotate,
)
from .metric import (
    DistanceResult,
    PLBijection,
    alignment_objective,
    based_distance,
    batch_alignment_objective,
    loop_distance,
    random_lambda_batch,
    random_pl_bijection,
    regather,
    skorokhod_d,
    slope_distortion,
    translation_continuity_probe,
)
from .occupation import (
    Box,
    OccupationMeasure,
    Pattern,
    monte_carlo_occupation,
    multi_occupation,
    occupation_measure,
    rotate_pattern,
)
from .reconstruct import (
    InjectivityReport,
    LoopOracle,
    ReconstructionResult,
    TableOracle,
    reconstruct_loop,
    verify_injectivity,
)
from .spaces import StateSpace

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
