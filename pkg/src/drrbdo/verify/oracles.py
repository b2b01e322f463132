"""Brute-force checks of the two duality identities behind the reformulation."""
import itertools
from dataclasses import dataclass

import numpy as np

from ..conic import SolverSettings, solve
from ..conic.builder import ProgramBuilder
from ..conic.cones import PSD
from ..conic.linalg import check_symmetric, svec, svec_length
from ..errors import SolverError
from ..robust.reformulation import add_norm_penalty, variance_program
from ..robust.uncertainty import LINF

# equality checks compare against closed forms; ask the solver for more digits than the default
ORACLE_SETTINGS = SolverSettings(tol=1e-10)


def variance_identity_oracle(kappa, sigma, g, settings=None):
    """Closed form kappa sqrt(g^T Sigma g) against the conic minimum over (Lambda, z)."""
    g = np.asarray(g, dtype=float)
    sigma = check_symmetric(sigma)
    closed = float(kappa * np.sqrt(max(g @ sigma @ g, 0.0)))
    prog, _ = variance_program(g, sigma, kappa)
    sol = solve(prog, settings or ORACLE_SETTINGS)
    if not sol.optimal:
        raise SolverError(sol, "variance identity oracle")
    return closed, float(sol.primal_objective)


def dual_min(lam, unc, settings=None):
    """min over Omega PSD of Sigma_tilde.(Lambda + Omega) + beta |B^T (Lambda + Omega) B|_*."""
    lam = check_symmetric(lam)
    n = lam.shape[0]
    base = float(np.sum(unc.sigma_tilde * lam))
    if unc.beta == 0.0:
        return base
    pb = ProgramBuilder()
    pb.var("Omega", svec_length(n))
    pen, aux = add_norm_penalty(pb, "Omega", unc, n, offset=lam)
    pb.cone(PSD, n, np.zeros(svec_length(n)), {"Omega": np.eye(svec_length(n))})
    prog = pb.build({"Omega": svec(unc.sigma_tilde), aux: unc.beta * pen[aux]})
    sol = solve(prog, settings or ORACLE_SETTINGS)
    if not sol.optimal:
        raise SolverError(sol, "covariance duality oracle")
    return base + float(sol.primal_objective)


def _candidate_perturbations(lam, unc):
    """Extreme points likely to maximize Lambda.(B Z B^T): the sign pattern / normalized direction and box vertices."""
    k = unc.k
    M = unc.B.T @ lam @ unc.B
    out = []
    if unc.norm == LINF:
        out.append(unc.beta * np.sign(M))
        t = svec_length(k)
        if t <= 10:
            rows, cols = np.tril_indices(k)
            for signs in itertools.product((-1.0, 1.0), repeat=t):
                Z = np.zeros((k, k))
                Z[rows, cols] = signs
                Z = Z + np.tril(Z, -1).T
                out.append(unc.beta * Z)
    else:
        nm = np.linalg.norm(M)
        if nm > 0:
            out.append(unc.beta * M / nm)
    return out


def _random_perturbations(unc, rng, count):
    k = unc.k
    t = svec_length(k)
    rows, cols = np.tril_indices(k)
    if unc.norm == LINF:
        low = rng.uniform(-unc.beta, unc.beta, (count, t))
    else:
        v = rng.standard_normal((count, t))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        low = v * unc.beta * rng.random((count, 1)) ** (1.0 / t)
        # svec coordinates -> raw lower-triangle entries
        low = low / np.where(rows == cols, 1.0, np.sqrt(2.0))
    Z = np.zeros((count, k, k))
    Z[:, rows, cols] = low
    Z[:, cols, rows] = low
    return Z


@dataclass
class DualityCheck:
    sampled_max: float
    dual_min: float
    gap: float
    accepted: int

    @property
    def sandwich_ok(self):
        return self.sampled_max <= self.dual_min + 1e-8


def variance_duality_oracle(lam, unc, sample_count, rng, settings=None, extremes=True):
    """Max of Lambda.Sigma over sampled PSD members of U_Sigma versus the conic dual bound.

    With ``extremes`` the sample set also holds the analytic maximizers of the
    unconstrained perturbation (box vertices / ball direction).
    """
    lam = check_symmetric(lam)
    Zs = _random_perturbations(unc, rng, sample_count)
    extra = _candidate_perturbations(lam, unc) if extremes else []
    if extra:
        Zs = np.concatenate([Zs, np.stack(extra)])
    S = unc.sigma_tilde + np.einsum("ia,sab,jb->sij", unc.B, Zs, unc.B)
    ok = np.linalg.eigvalsh(S)[:, 0] > 0.0
    values = np.einsum("sij,ij->s", S[ok], lam)
    sampled = float(values.max()) if values.size else -np.inf
    dmin = dual_min(lam, unc, settings)
    gap = (dmin - sampled) / max(abs(dmin), 1e-300)
    return DualityCheck(sampled, dmin, float(gap), int(np.count_nonzero(ok)))


def random_spd(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.exp(rng.uniform(0.0, np.log(cond), n))
    return (Q * eig) @ Q.T


def variance_identity_battery(count, rng, settings=None):
    """Random instances side <= 5; returns a list of dicts with the relative gap."""
    out = []
    for i in range(count):
        n = int(rng.integers(1, 6))
        kappa = float(rng.uniform(0.1, 5.0))
        sigma = random_spd(rng, n)
        g = rng.standard_normal(n)
        closed, sdp = variance_identity_oracle(kappa, sigma, g, settings)
        gap = abs(closed - sdp) / max(1.0, abs(closed))
        out.append({"instance": i, "n": n, "kappa": kappa, "closed_form": closed, "sdp": sdp, "gap": gap, "passed": gap <= 1e-6})
    return out
