"""bregopt: stochastic Bregman gradient methods for relatively smooth
finite-sum optimization.

The package provides mirror maps (reference functions), finite-sum
objectives, stochastic and deterministic Bregman solvers with variance
reduction (SAGA and SVRG estimators), problem generators for Poisson inverse
problems, tomography and simulated distributed logistic regression, plus a
certification harness that checks the structural identities the convergence
theory rests on.
"""

from .errors import (
    AnchorsUnavailable,
    BregoptError,
    DomainViolation,
    InnerSolveFailure,
    InsufficientData,
    InvalidConstants,
    InvalidData,
    LabelError,
    ParseError,
    StepFailure,
    StepOutOfDomain,
)
from .metrics import (
    CertReport,
    CheckResult,
    Trace,
    TraceRecord,
    certify_lemmas,
    plateau_level,
    rate_fit,
    saga_potential,
    saga_table_error,
    sigma2_estimate,
    svrg_potential,
)
from .mirror import (
    Euclidean,
    LogBarrier,
    NegEntropy,
    Preconditioner,
    ReferenceFunction,
    make_reference,
    mirror_step,
)
from .objective import (
    DiagonalQuadratic,
    FiniteSumObjective,
    LogisticL2,
    PoissonKL,
    poisson_rel_L,
    rel_constants_logistic,
)
from .problems import (
    CommModel,
    ProblemInstance,
    gen_gaussian_logistic_data,
    gen_interpolation,
    gen_preconditioned,
    gen_tomography,
    load_instance,
    load_libsvm,
    poisson_sample,
    radon_matrix,
    save_instance,
    save_libsvm,
    shepp_logan,
    solve_reference,
)
from .rng import make_rng
from .solver import (
    RunFailure,
    SagaState,
    SgdState,
    SolverConfig,
    SvrgState,
    adaptive_check,
    bgd_run,
    bgd_step,
    bsaga_step,
    bsgd_step,
    bsvrg_step,
    gain_bound,
    mu_step,
    run,
    saga_gradient,
    step_policy,
    svrg_gradient,
)

__version__ = "0.1.0"
