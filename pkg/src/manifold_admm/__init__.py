"""Multi-block ADMM for nonconvex problems with Riemannian manifold
constraints, with closed-form block kernels and three applications
(max bisection, sparse tensor PCA, community detection)."""

from .engine import (
    IterateState,
    LineSearchError,
    SolveResult,
    SolverConfig,
    StationarityReport,
    TraceRow,
    UnsupportedBlockError,
    augmented_lagrangian,
    initial_state,
    make_config,
    measure_stationarity,
    potential_psi,
    solve,
    step,
)
from .manifolds import Euclidean, Sphere, Stiefel, retract, riemannian_grad, tangent_project
from .params import (
    ComplexityBudget,
    InfeasibleParametersError,
    Variant,
    complexity_budget,
    default_parameters,
)
from .problem import (
    NONNEG,
    WHOLE,
    ZERO,
    Block,
    MultiBlockProblem,
    Regularizer,
    SmoothOracle,
    box,
    capped_lq,
    decouple_nonconvex_regularizers,
    l1,
    lift_general_problem,
    lq,
    validate,
)
from .prox import (
    LqProxSpec,
    linear_min_on_nonneg_sphere,
    lq_prox,
    nearest_orthogonal,
    nonneg_project,
    scalar_lq_prox,
)
from .synthetic import NoisyOracle, QuadraticCouplingOracle, build_synthetic_problem

__version__ = "0.1.0"
