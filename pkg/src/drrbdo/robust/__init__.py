from .reformulation import (
    LinearizedConstraint,
    RobustCertificate,
    SubproblemLayout,
    assemble_nominal,
    assemble_subproblem,
    constraint_at,
    deterministic_margin,
    robust_audit,
    robust_margin,
    variance_program,
    worst_variance_term,
)
from .reliability import ALL, GAUSSIAN, ReliabilitySpec, kappa, normal_cdf, normal_quantile
from .sequential import (
    CONVERGED,
    NOT_CONVERGED,
    SequentialResult,
    SequentialSettings,
    sequential_sdp,
    solve_nominal,
)
from .uncertainty import L2, LINF, MomentUncertainty, load_uncertainty, uncertainty_from_dict, worst_mean_term
