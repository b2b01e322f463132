"""Nominal baseline and the sequential linearized conic outer loop."""
import logging
from dataclasses import dataclass, field

import numpy as np

from ..conic import SolverSettings, solve
from ..errors import InfeasibleBudgetError, SolverError
from ..truss import design_point
from .reformulation import RobustCertificate, assemble_nominal, assemble_subproblem, robust_audit

log = logging.getLogger(__name__)

CONVERGED = "converged"
NOT_CONVERGED = "not-converged"


@dataclass
class SequentialSettings:
    max_iter: int = 100
    rtol: float = 1e-5
    audit_rtol: float = 1e-6
    solver: SolverSettings = field(default_factory=SolverSettings)


@dataclass
class SequentialResult:
    design: object               # DesignPoint
    certificate: RobustCertificate
    log: list
    status: str
    iterations: int
    nominal: object = None

    @property
    def converged(self):
        return self.status == CONVERGED

    @property
    def audit_ok(self):
        return bool(self.certificate.breakdown.get("audit_ok", False))


def _solve_checked(prog, settings, context):
    sol = solve(prog, settings)
    if not sol.optimal:
        raise SolverError(sol, context)
    return sol


def solve_nominal(model, settings=None):
    """Minimum volume subject to the exact compliance LMI and the area bounds."""
    prog, layout = assemble_nominal(model)
    sol = _solve_checked(prog, settings, "nominal problem")
    x = np.maximum(layout.unpack(sol.y)["x"], model.x_min)
    return design_point(model, x)


def _robust_step(model, x, unc, spec, settings, k):
    h = design_point(model, x).gradient
    prog, layout = assemble_subproblem(model, h, unc, spec)
    sol = _solve_checked(prog, settings.solver, f"robust subproblem, iteration {k}")
    return layout.unpack(sol.y), sol


def sequential_sdp(model, unc, spec, settings=None, x0=None):
    """Iterate the robust subproblem with the gradient frozen at the previous design.

    Starts from ``x0`` or, by default, the nominal optimum.  If the first
    subproblem from a user ``x0`` is infeasible or fails, restarts from the
    nominal optimum.
    """
    settings = settings or SequentialSettings()
    spec.check_robust()
    nominal = solve_nominal(model, settings.solver)
    x = nominal.areas.copy() if x0 is None else np.asarray(x0, dtype=float)
    history = []
    status = NOT_CONVERGED
    k = 0
    for k in range(1, settings.max_iter + 1):
        try:
            parts, sol = _robust_step(model, x, unc, spec, settings, k)
        except (InfeasibleBudgetError, SolverError):
            if k == 1 and x0 is not None:
                log.info("first robust subproblem failed from the given start; restarting from the nominal optimum")
                x = nominal.areas.copy()
                x0 = None
                parts, sol = _robust_step(model, x, unc, spec, settings, k)
            else:
                raise
        x_new = np.maximum(parts["x"], model.x_min)
        change = float(np.max(np.abs(x_new - x)) / np.max(np.abs(x)))
        history.append({
            "iteration": k,
            "areas": x_new.tolist(),
            "volume": float(model.area_unit * model.lengths @ x_new),
            "s": parts["s"],
            "change": change,
            "solver_iterations": sol.iterations,
        })
        log.debug("iteration %d: change %.3e, volume %.6e", k, change, history[-1]["volume"])
        x = x_new
        if change <= settings.rtol:
            status = CONVERGED
            break

    breakdown, cert = robust_audit(model, x, unc, spec, settings.solver)
    breakdown["audit_ok"] = bool(breakdown["total"] <= settings.audit_rtol * model.pi_bar)
    cert.breakdown = breakdown
    design = design_point(model, x, margin=breakdown)
    return SequentialResult(design=design, certificate=cert, log=history, status=status, iterations=k, nominal=nominal)
