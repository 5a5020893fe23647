"""Mixed-precision single-pass Nystrom approximation, error bounds and
limited-memory preconditioning."""

from .analysis import (
    BoundReport,
    bound_report,
    eta_ratio,
    expected_exact_error_bound,
    finite_error_proxy,
    gamma_factors,
    heuristic_check,
    lemma_bounds,
    partitioned_bound,
    theorem_total_bound,
    weighted_pseudoinv_norm,
)
from .errors import (
    BreakdownError,
    CholeskyError,
    ConfigError,
    FormatOverflowError,
    MatrixMarketError,
    NotPsdError,
    NumericError,
    RankDeficiencyError,
    SingularPreconditionerError,
    TheoryRangeError,
)
from .matrices import (
    SpdMatrix,
    SyntheticSpec,
    gen_gaussian_kernel,
    gen_synthetic,
    load_matrix_market,
    save_matrix_market,
    spectrum,
)
from .nystrom import NystromApprox, approx_errors, draw_sketch, load_approx, nystrom_approx, save_approx
from .pcg import PcgConfig, PcgResult, pcg_solve, rhs_uniform
from .precision import FloatFormat, MatmulMode, OverflowPolicy, builtin_format, matmul_lowprec, round_to
from .precond import LmpPreconditioner, build_lmp, cond_bounds, from_eigenpairs, measured_condition_number

__version__ = "0.1.0"
