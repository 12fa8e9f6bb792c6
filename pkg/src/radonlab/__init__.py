"""Numerical laboratory for multi-parameter geometry of vector field families.

The package builds, from a list of vector fields with formal degrees:
Carnot-Caratheodory ball statistics, exponential charts, dyadic kernel
families with cancellation bookkeeping, windowed averaging operators
and their Littlewood-Paley difference blocks on a periodic-free grid
box, empirical operator-norm and almost-orthogonality measurements,
and a Heisenberg-group worked example, all driven by a deterministic
CLI.
"""

from .errors import (
    ChartDegenerateError,
    ConditioningError,
    ContractionError,
    CoverageError,
    DegeneratePointError,
    DimensionMismatchError,
    EscapeError,
    FitError,
    GrowthError,
    InversionError,
    KernelClassError,
    RadonlabError,
    UnsupportedInputError,
    UsageError,
)
from .fields import (
    DilationExponents,
    FormalDegree,
    GammaSpec,
    VectorFieldSpec,
    WeightedField,
    check_commutator_certificate,
    commutator,
    compute_W,
    delta_power,
    dilate_param,
    generate_finite_list,
    pure_power_fields,
    scale_fields,
    taylor_fields,
)
from .flows import (
    BallEstimate,
    ExpChart,
    FlowConfig,
    ball_estimates_csv,
    ball_membership,
    ball_volume,
    cc_distance,
    doubling_ratio,
    flow_combo,
    flow_piecewise,
    pullback_fields,
    select_frame,
    unit_ball_volume,
)
from .grid import (
    Grid,
    GridFunction,
    dump_grid_function,
    grid_function_csv,
    load_grid_function,
    load_grid_function_csv,
)
from .kernels import (
    Bump,
    DyadicKernel,
    cancellation_required,
    default_family,
    dilate_bump,
    enforce_cancellation,
    index_set,
    kernel_eval,
    kernel_manifest,
    make_bump,
    make_delta0_family,
    make_product_kernel,
    parse_kernel_manifest,
    product_estimate_check,
    synth_kernel,
    tensor_bump,
)
from .operators import (
    CutoffChain,
    LinearOperatorHandle,
    OperatorFactory,
    WindowSigma,
    build_gamma_hat,
    default_delta_grid,
    jE_index,
    kernel_mass_outside,
    schwartz_kernel,
)
from .estimates import (
    BlockFamily,
    DecayFit,
    NeumannConfig,
    NormEstimate,
    bootstrap_pset,
    build_UM_RM,
    build_VM,
    decay_fit_csv,
    l2_opnorm,
    lp_opnorm_lower,
    norm_estimates_csv,
    orthogonality_decay,
    rademacher_probe,
    sample_pairs,
    square_function,
    vector_valued_decay,
)
from .heisenberg import (
    dilation_covariance_check,
    heis_dilate,
    heis_fields,
    heis_flow,
    heis_gamma,
    strong_maximal,
    xst_experiment,
)

__version__ = "0.1.0"
