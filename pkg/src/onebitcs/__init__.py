"""1-bit compressive sensing: soft-consistency (SCR) and BIHT recovery plus a
seeded Monte-Carlo benchmark harness."""
from .errors import (
    ConfigError,
    DegenerateError,
    DomainError,
    IncompleteSweepError,
    InvalidParameterError,
    OneBitCSError,
    ShapeError,
)
from .metrics import TrialMetrics, angular_error, hamming_error, support_metrics
from .objectives import (
    ObjectiveValue,
    OneSided,
    SoftParams,
    biht_descent_direction,
    one_sided,
    scr_gradient,
    scr_objective,
    soft_inconsistency,
    soft_sign,
)
from .signal_model import (
    Instance,
    SparseSignal,
    derive_seed,
    gen_sensing_matrix,
    gen_sparse_signal,
    make_instance,
    measure,
)
from .solvers import (
    Algorithm,
    HardK,
    ReconResult,
    SoftLambda,
    SolverConfig,
    init_estimate,
    reconstruct,
    soft_threshold,
    top_k,
)

__version__ = "0.1.0"
