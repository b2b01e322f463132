from .cones import NONNEG, PSD, SOC, ConeBlock, ConeSpec
from .linalg import factor_spd, is_pd, min_eigenvalue, smat, svec, svec_length
from .solver import (
    DUAL_INFEASIBLE,
    MAX_ITERATIONS,
    OPTIMAL,
    PRIMAL_INFEASIBLE,
    ConeProgram,
    ConeSolution,
    SolverSettings,
    solve,
)
