"""Convex uncertainty sets for the mean vector and covariance matrix."""
import json
from dataclasses import dataclass, replace
from pathlib import Path

import jsonschema
import numpy as np

from ..conic.linalg import check_symmetric, factor_spd
from ..errors import StructuralError
from .reliability import GAUSSIAN, ReliabilitySpec

LINF = "linf"
L2 = "l2"
NORMS = (LINF, L2)


@dataclass
class MomentUncertainty:
    """U_mu = {mu_tilde + A z1 : |z1| <= alpha},  U_Sigma = {Sigma_tilde + B Z2 B^T : |Z2| <= beta} cap PSD.

    ``norm`` selects the box/entrywise-max model (``"linf"``) or the
    ball/Frobenius model (``"l2"``).
    """

    mu_tilde: np.ndarray
    sigma_tilde: np.ndarray
    alpha: float = 0.0
    beta: float = 0.0
    norm: str = LINF
    A: np.ndarray = None
    B: np.ndarray = None

    def __post_init__(self):
        self.sigma_tilde = check_symmetric(self.sigma_tilde)
        n = self.sigma_tilde.shape[0]
        self.mu_tilde = np.zeros(n) if self.mu_tilde is None else np.asarray(self.mu_tilde, dtype=float)
        self.A = np.eye(n) if self.A is None else np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.eye(n) if self.B is None else np.atleast_2d(np.asarray(self.B, dtype=float))
        if self.mu_tilde.shape != (n,):
            raise StructuralError(f"mu_tilde has shape {self.mu_tilde.shape}, expected ({n},)")
        if self.A.shape[0] != n or self.B.shape[0] != n:
            raise StructuralError("A and B need one row per random variable")
        if self.norm not in NORMS:
            raise StructuralError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if self.alpha < 0 or self.beta < 0:
            raise StructuralError("alpha and beta must be nonnegative")
        if not factor_spd(self.sigma_tilde)[1]:
            raise StructuralError("sigma_tilde must be positive definite")
        self.alpha = float(self.alpha)
        self.beta = float(self.beta)

    @property
    def n(self):
        return self.sigma_tilde.shape[0]

    @property
    def m(self):
        return self.A.shape[1]

    @property
    def k(self):
        return self.B.shape[1]

    def with_(self, **changes):
        return replace(self, **changes)

    def vector_norm(self, v):
        """Dual norm used for the worst-case mean: l1 for the box model, l2 for the ball."""
        return float(np.sum(np.abs(v))) if self.norm == LINF else float(np.linalg.norm(v))

    def matrix_norm(self, M):
        """Dual matrix norm of the covariance perturbation: entrywise l1 or Frobenius."""
        return float(np.sum(np.abs(M))) if self.norm == LINF else float(np.linalg.norm(M))

    def to_dict(self):
        return {
            "mu_tilde": self.mu_tilde.tolist(),
            "sigma_tilde": self.sigma_tilde.tolist(),
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "alpha": self.alpha,
            "beta": self.beta,
            "norm": self.norm,
        }


def _schema():
    from importlib import resources

    return json.loads(resources.files("drrbdo.schemas").joinpath("uncertainty.schema.json").read_text())


def uncertainty_from_dict(doc):
    """Parse an uncertainty document into ``(MomentUncertainty, ReliabilitySpec)``."""
    jsonschema.validate(doc, _schema())
    unc = MomentUncertainty(
        mu_tilde=doc.get("mu_tilde"),
        sigma_tilde=np.asarray(doc["sigma_tilde"], dtype=float),
        alpha=doc["alpha"],
        beta=doc["beta"],
        norm=doc["norm"],
        A=doc.get("A"),
        B=doc.get("B"),
    )
    spec = ReliabilitySpec(epsilon=doc["epsilon"], family=doc.get("family", GAUSSIAN))
    return unc, spec


def load_uncertainty(path):
    p = Path(path)
    if not p.exists():
        from ..truss import bundled_path

        p = bundled_path(str(path))
    with open(p) as fh:
        return uncertainty_from_dict(json.load(fh))


def worst_mean_term(con, unc):
    """max over mu in U_mu of grad . mu, in closed form via the dual norm.

    ``con`` is a :class:`LinearizedConstraint` or a bare gradient vector.
    """
    gradient = np.asarray(getattr(con, "gradient", con), dtype=float)
    return float(gradient @ unc.mu_tilde + unc.alpha * unc.vector_norm(unc.A.T @ gradient))
