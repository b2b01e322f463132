"""Deterministic conic reformulation of the worst-case reliability constraint.

The worst-case budget for a linearized constraint ``g + grad . zeta <= 0``
reads::

    g + grad.mu_tilde + alpha |A^T grad|_* + Sigma_tilde . W + beta |B^T W B|_* + kappa^2 z <= 0
    [[W, grad/2], [grad^T/2, z]] PSD

where ``|.|_*`` is l1 / entrywise-l1 for the box model and l2 / Frobenius for
the ball model.  This module evaluates those terms, builds the conic
programs that minimize them, and assembles the per-iteration truss
subproblem.
"""
from dataclasses import dataclass, field

import numpy as np

from ..conic import solve
from ..conic.builder import ProgramBuilder
from ..conic.cones import PSD, SOC
from ..conic.linalg import _tri_indices, check_symmetric, min_eigenvalue, smat, svec, svec_length
from ..errors import InfeasibleBudgetError, SolverError, StructuralError
from ..truss import compliance, compliance_and_gradient
from .uncertainty import LINF, worst_mean_term


@dataclass
class LinearizedConstraint:
    value: float
    gradient: np.ndarray

    def __post_init__(self):
        self.value = float(self.value)
        self.gradient = np.asarray(self.gradient, dtype=float).ravel()


@dataclass
class RobustCertificate:
    z: float
    W: np.ndarray
    breakdown: dict = field(default_factory=dict)

    def block(self, gradient):
        n = len(gradient)
        M = np.empty((n + 1, n + 1))
        M[:n, :n] = self.W
        M[:n, n] = M[n, :n] = np.asarray(gradient) / 2.0
        M[n, n] = self.z
        return M


def constraint_at(model, x):
    """Compliance constraint pi(x) - pi_bar <= 0 linearized at x."""
    pi, grad = compliance_and_gradient(model, x)
    return LinearizedConstraint(pi - model.pi_bar, grad)


def deterministic_margin(con, mu, sigma, kappa):
    """g + grad.mu + kappa * sqrt(grad^T Sigma grad) for known moments."""
    sigma = check_symmetric(sigma)
    g = con.gradient
    var = max(float(g @ sigma @ g), 0.0)
    return float(con.value + g @ np.asarray(mu, dtype=float) + kappa * np.sqrt(var))


def _norm_maps(B, n):
    """Linear maps from svec(W) (side n) to svec(B^T W B) and to its raw lower triangle."""
    k = B.shape[1]
    t = svec_length(n)
    S = np.empty((svec_length(k), t))
    eye = np.eye(t)
    for q in range(t):
        S[:, q] = svec(B.T @ smat(eye[q]) @ B)
    _, _, scale = _tri_indices(k)
    return S, S / scale[:, None], scale


def _penalty_weights(k):
    rows, cols, _ = _tri_indices(k)
    return np.where(rows == cols, 1.0, 2.0)


def add_norm_penalty(pb, wname, unc, n, offset=None):
    """Add auxiliaries bounding the matrix norm of B^T (W + offset) B.

    Returns ``(objective_terms, aux_name)``: the dict of linear objective
    coefficients that evaluates ``norm(B^T (W + offset) B)`` at the optimum
    (to be multiplied by beta by the caller).
    """
    B = unc.B
    k = B.shape[1]
    S, Lraw, _ = _norm_maps(B, n)
    const = np.zeros(S.shape[0]) if offset is None else svec(B.T @ offset @ B)
    const_raw = const / _tri_indices(k)[2]
    if unc.norm == LINF:
        kk = svec_length(k)
        pb.var("T", kk)
        eye = np.eye(kk)
        # T - M >= 0 and T + M >= 0 on the lower triangle of M = B^T W B
        pb.nonneg(-const_raw, {"T": eye, wname: -Lraw})
        pb.nonneg(const_raw, {"T": eye, wname: Lraw})
        return {"T": _penalty_weights(k)}, "T"
    pb.var("r", 1)
    dim = 1 + S.shape[0]
    Ar = np.zeros((dim, 1))
    Ar[0, 0] = 1.0
    Aw = np.vstack([np.zeros((1, S.shape[1])), S])
    pb.cone(SOC, dim, np.concatenate([[0.0], const]), {"r": Ar, wname: Aw})
    return {"r": np.ones(1)}, "r"


def _embed_columns(n_inner, side, offset_row=0):
    """Matrix mapping svec of an n_inner-side matrix to svec of a side-``side`` matrix holding it top-left."""
    rows_i, cols_i, _ = _tri_indices(n_inner)
    rows_o, cols_o, _ = _tri_indices(side)
    where = {(r, c): q for q, (r, c) in enumerate(zip(rows_o, cols_o))}
    E = np.zeros((svec_length(side), svec_length(n_inner)))
    for q, (r, c) in enumerate(zip(rows_i, cols_i)):
        E[where[(r + offset_row, c + offset_row)], q] = 1.0
    return E


def _corner_column(side):
    v = np.zeros(svec_length(side))
    v[-1] = 1.0
    return v


def _grad_block_const(g):
    """svec of [[0, g/2], [g^T/2, 0]]."""
    n = len(g)
    M = np.zeros((n + 1, n + 1))
    M[:n, n] = M[n, :n] = g / 2.0
    return svec(M)


def variance_program(gradient, sigma, kappa, unc=None):
    """Program minimizing Sigma.W + beta |B^T W B|_* + kappa^2 z over the gradient block.

    ``unc`` supplies beta, B and the norm; None means beta = 0 (known covariance).
    """
    g = np.asarray(gradient, dtype=float)
    n = len(g)
    t = svec_length(n)
    pb = ProgramBuilder()
    pb.var("W", t)
    pb.var("z", 1)
    obj = {"W": svec(sigma), "z": np.array([kappa ** 2])}
    if unc is not None and unc.beta > 0:
        pen, aux = add_norm_penalty(pb, "W", unc, n)
        obj[aux] = unc.beta * pen[aux]
    side = n + 1
    pb.cone(PSD, side, _grad_block_const(g), {"W": _embed_columns(n, side), "z": _corner_column(side)})
    return pb.build(obj), pb


def worst_variance_term(gradient, unc, kappa, sigma=None, settings=None):
    """Optimal ``(value, W, z)`` of the variance part of the robust budget.

    The problem is positively homogeneous in the gradient, so it is solved for
    the normalized gradient and rescaled.
    """
    g = np.asarray(gradient, dtype=float)
    n = len(g)
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return 0.0, np.zeros((n, n)), 0.0
    sigma = unc.sigma_tilde if sigma is None else sigma
    prog, pb = variance_program(g / gn, sigma, kappa, unc)
    sol = solve(prog, settings)
    if not sol.optimal:
        raise SolverError(sol, "variance term")
    parts = pb.unpack(sol.y)
    W = smat(parts["W"]) * gn
    z = float(parts["z"][0]) * gn
    return sol.primal_objective * gn, W, z


def robust_margin(con, unc, spec, W, z):
    """Left side of the robust budget at given (W, z), term by term."""
    W = check_symmetric(W)
    kappa = spec.kappa
    terms = {
        "deterministic": con.value,
        "worst_mean": worst_mean_term(con, unc),
        "sigma_dot_W": float(np.sum(unc.sigma_tilde * W)),
        "norm_penalty": unc.beta * unc.matrix_norm(unc.B.T @ W @ unc.B),
        "kappa2_z": kappa ** 2 * float(z),
    }
    terms["total"] = sum(terms.values())
    M = RobustCertificate(z, W).block(con.gradient)
    terms["block_min_eig"] = min_eigenvalue(M)
    return terms


def robust_audit(model, x, unc, spec, settings=None):
    """True robust margin at x with a fresh gradient; returns ``(breakdown, certificate)``."""
    con = constraint_at(model, x)
    _, W, z = worst_variance_term(con.gradient, unc, spec.kappa, settings=settings)
    breakdown = robust_margin(con, unc, spec, W, z)
    return breakdown, RobustCertificate(z=z, W=W, breakdown=breakdown)


@dataclass
class SubproblemLayout:
    """Variable map of an assembled truss program plus the internal scale factors."""

    builder: ProgramBuilder
    n: int
    x_scale: float
    pi_scale: float
    mode: str
    norm: str = ""
    constant_terms: dict = field(default_factory=dict)

    @property
    def slices(self):
        return self.builder.slices

    def unpack(self, y):
        parts = self.builder.unpack(y)
        out = {"x": parts["xi"] * self.x_scale}
        if self.mode == "robust":
            out["s"] = float(parts["sigma"][0]) * self.pi_scale
            out["z"] = float(parts["zeta"][0]) * self.pi_scale
            out["W"] = smat(parts["W"]) * self.pi_scale
            for aux in ("T", "r"):
                if aux in parts:
                    out[aux] = parts[aux] * self.pi_scale
        return out


def _x_scale(model):
    # uniform design t*1 with compliance pi_bar, floored by the largest lower bound
    t = compliance(model, np.ones(model.n_members)) / model.pi_bar
    return max(t, float(np.max(model.x_min)))


def _lmi_terms(model, x_scale, with_s):
    """Scaled compliance LMI: congruence diag(a I, b) applied to [[K(x), p], [p^T, s]]."""
    d = model.n_dofs
    side = d + 1
    p = model.load
    pnorm = float(np.linalg.norm(p))
    if pnorm == 0.0:
        raise StructuralError("load vector is zero")
    pi_bar = model.pi_bar
    a2 = pi_bar / pnorm ** 2
    ab = 1.0 / pnorm
    E = _embed_columns(d, side)
    Kcols = np.stack([E @ svec(model.member_matrix(j)) for j in range(model.n_members)], axis=1)
    const = np.zeros((side, side))
    const[:d, d] = const[d, :d] = ab * p
    terms = {"xi": a2 * x_scale * Kcols}
    const = svec(const)
    if with_s:
        terms["sigma"] = _corner_column(side)[:, None]
    else:
        const[-1] = 1.0
    return side, const, terms


def _objective_weights(model):
    return model.lengths / np.sum(model.lengths)


def assemble_nominal(model):
    """min c.x  s.t.  x >= x_min,  [[K(x), p], [p^T, pi_bar]] PSD (exact, no linearization)."""
    xs = _x_scale(model)
    n = model.n_members
    pb = ProgramBuilder()
    pb.var("xi", n)
    pb.nonneg(-model.x_min / xs, {"xi": np.eye(n)})
    side, const, terms = _lmi_terms(model, xs, with_s=False)
    pb.cone(PSD, side, const, terms)
    prog = pb.build({"xi": _objective_weights(model)})
    return prog, SubproblemLayout(pb, n, xs, model.pi_bar, "nominal")


def assemble_subproblem(model, h, unc, spec):
    """Linear conic subproblem for one sequential iteration with frozen gradient ``h``.

    Variables (internally scaled): areas, compliance bound s, z, svec(W) and
    the norm auxiliaries; see :class:`SubproblemLayout` for unpacking.
    """
    h = np.asarray(h, dtype=float)
    n = model.n_members
    if h.shape != (n,) or unc.n != n:
        raise StructuralError(f"gradient/uncertainty size mismatch: {h.shape}, n={unc.n}, members={n}")
    kappa = spec.kappa
    if kappa < 0:
        raise ValueError("negative kappa")
    pi_bar = model.pi_bar
    constant = {
        "worst_mean": worst_mean_term(h, unc),
        "pi_bar": pi_bar,
    }
    if constant["worst_mean"] >= pi_bar:
        raise InfeasibleBudgetError(constant)

    xs = _x_scale(model)
    ps = pi_bar
    t = svec_length(n)
    pb = ProgramBuilder()
    pb.var("xi", n)
    pb.var("sigma", 1)
    pb.var("zeta", 1)
    pb.var("W", t)
    pb.nonneg(-model.x_min / xs, {"xi": np.eye(n)})
    pen, aux = add_norm_penalty(pb, "W", unc, n)
    # budget: 1 - const/pi_bar - sigma - Sigma.W - beta*pen - kappa^2 zeta >= 0
    budget = {
        "sigma": -np.ones((1, 1)),
        "zeta": -np.array([[kappa ** 2]]),
        "W": -svec(unc.sigma_tilde)[None, :],
        aux: -unc.beta * pen[aux][None, :],
    }
    pb.nonneg(1.0 - constant["worst_mean"] / ps, budget)
    side, const, terms = _lmi_terms(model, xs, with_s=True)
    pb.cone(PSD, side, const, terms)
    gside = n + 1
    pb.cone(PSD, gside, _grad_block_const(h / ps), {"W": _embed_columns(n, gside), "zeta": _corner_column(gside)})
    prog = pb.build({"xi": _objective_weights(model)})
    return prog, SubproblemLayout(pb, n, xs, ps, "robust", unc.norm, constant)
