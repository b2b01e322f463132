from .montecarlo import (
    DoubleLoopResult,
    FailureEstimate,
    McConfig,
    double_loop,
    failure_probability,
    histogram,
    moments_from_draw,
    sample_gaussian,
    sample_moments,
)
from .oracles import DualityCheck, dual_min, variance_identity_battery, variance_identity_oracle, variance_duality_oracle
