"""Anderson, EDIIS and smoothing Anderson acceleration for composite-max fixed-point maps."""

from .accelerate import (
    DepthPolicy,
    IterationRecord,
    MuSchedule,
    RunReport,
    StoppingRule,
    anderson_run,
    depth_next,
    run_method,
    s_anderson_run,
    tail_qfactor,
)
from .composite_map import CompositeMaxMap, ExtendedBox, eval_G, project_box, residual
from .errors import (
    AmbiguousSolutionError,
    ConfigError,
    EvaluationError,
    FPAccelError,
    InsufficientDataError,
    InvalidInputError,
    InvalidParameterError,
    InvalidScheduleError,
    NoSolutionError,
    UnsupportedDepthError,
)
from .harness import (
    AggregateReport,
    ExperimentConfig,
    aggregate,
    emit_report,
    load_config,
    parse_config,
    run_experiment,
)
from .numkernel import ls_pinv, mid, solve_anderson_coeffs, solve_ediis_coeffs, spectral_norm
from .problems import (
    LcpData,
    ProblemInstance,
    gen_dirichlet,
    gen_lcp_option,
    gen_nash,
    lcp_bruteforce,
    lcp_recover,
    lcp_rescale,
    make_problem,
    toy_remark,
)
from .smoothing import (
    SmoothedMapHandle,
    SmoothingKernel,
    compute_mu_bar,
    eval_smoothed_G,
    get_kernel,
    kernel_deriv,
    kernel_value,
    smoothed_projection,
)

__version__ = "0.1.0"
