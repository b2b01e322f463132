class StructuralError(ValueError):
    """Malformed input: wrong shapes, asymmetric matrices, negative areas."""


class MechanismError(RuntimeError):
    """Stiffness matrix is singular at the requested design."""

    def __init__(self, areas, message=None):
        self.areas = areas
        super().__init__(message or f"design is mechanism-unstable (K singular) at areas {list(areas)}")


class InfeasibleBudgetError(RuntimeError):
    """Constant terms of the robust budget already exceed the compliance bound."""

    def __init__(self, breakdown):
        self.breakdown = dict(breakdown)
        parts = ", ".join(f"{k}={v:.6g}" for k, v in self.breakdown.items())
        super().__init__(f"robust budget infeasible: {parts}")


class ConfigurationError(ValueError):
    """Uncertainty/sampling configuration that cannot be honoured."""


class SolverError(RuntimeError):
    """Conic solve ended without an optimal status."""

    def __init__(self, solution, context=""):
        self.solution = solution
        msg = f"conic solver returned status {solution.status!r}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)
