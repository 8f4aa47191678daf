"""Data-driven predictive control toolkit.

Builds direct data-driven (DeePC-style) and multi-step-predictor (SPC-style)
controllers from recorded input/output data of an LTI plant, solves them on a
shared dense QP kernel, verifies their equivalence numerically, and benchmarks
them in closed loop.
"""

from .lti import (
    BenchmarkParams,
    NoiseSpec,
    StateSpaceModel,
    Trajectory,
    UnobservableModelError,
    build_benchmark_model,
    load_model,
    numeric_rank,
    nullspace,
    observability_matrix,
    save_model,
    simulate,
    system_lag,
    toeplitz_matrix,
)
from .datasets import (
    AssumptionReport,
    DataMatrices,
    DataShape,
    DatasetFormatError,
    ExcitationSpec,
    check_assumptions,
    check_persistency,
    collect_sequences,
    hankel_dataset,
    kernel_inclusion_gap,
    load_dataset,
    partition,
    save_dataset,
)
from .predictor import MultiStepPredictor, identify, predict, pseudoinverse, save_predictor
from .qp import (
    BoxQpSolution,
    QpError,
    QpInfeasibleError,
    QpIterationLimitError,
    QpRankDeficientError,
    QpSingularReducedError,
    solve_box_qp,
)
from .ocp import (
    BoxConstraints,
    DeepcController,
    InitialWindow,
    OcpSolution,
    RegWeights,
    RegularizedDeepcController,
    RegularizedSpcController,
    RegulationObjective,
    SingularityError,
    SpcController,
    WindowInfeasibleError,
    explicit_deepc_unconstrained,
    explicit_spc_unconstrained,
    solution_to_dict,
    solve_deepc,
    solve_deepc_regularized,
    solve_spc,
    solve_spc_regularized,
)
from .rng import Rng, derive_seed

__version__ = "0.1.0"
