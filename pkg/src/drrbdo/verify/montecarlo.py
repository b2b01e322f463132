"""Double-loop Monte Carlo: moments drawn from the uncertainty set, inputs from each N(mu, Sigma)."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..conic.linalg import factor_spd, smat, svec_length
from ..errors import ConfigurationError, StructuralError
from ..robust.reformulation import LinearizedConstraint, constraint_at
from ..robust.uncertainty import LINF
from ..truss import TrussModel
from .kernels import box_muller, exact_fail_count, linear_fail_count

MAX_ATTEMPTS = 100_000
MAX_REJECTION = 0.999
HIST_BINS = 50


@dataclass
class McConfig:
    outer: int = 200
    inner: int = 20_000
    seed: int = 0
    exact: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.outer < 1 or self.inner < 1:
            raise ConfigurationError("sample counts must be at least 1")


@dataclass
class FailureEstimate:
    probability: float
    failures: int
    count: int
    skipped: int = 0


@dataclass
class MomentDraw:
    mu: np.ndarray
    sigma: np.ndarray
    attempts: int = 1


@dataclass
class DoubleLoopResult:
    draws: list
    estimates: list
    epsilon: float
    inner: int
    histogram: tuple = field(default=None)

    @property
    def probabilities(self):
        return np.array([e.probability for e in self.estimates])

    @property
    def max(self):
        return float(self.probabilities.max())

    @property
    def mean(self):
        return float(self.probabilities.mean())

    @property
    def skipped(self):
        return int(sum(e.skipped for e in self.estimates))

    def slack(self):
        """Binomial allowance 3 sqrt(eps / inner) used in certification."""
        return 3.0 * np.sqrt(self.epsilon / self.inner)

    def certified(self):
        return self.max <= self.epsilon + self.slack()

    def summary(self):
        counts, edges = self.histogram
        return {
            "max": self.max,
            "mean": self.mean,
            "epsilon": self.epsilon,
            "slack": self.slack(),
            "certified": bool(self.certified()),
            "outer": len(self.estimates),
            "inner": self.inner,
            "skipped": self.skipped,
            "histogram": {"edges": edges.tolist(), "counts": counts.tolist()},
        }

    def rows(self):
        n = len(self.draws[0].mu)
        iu = np.triu_indices(n)
        for i, (draw, est) in enumerate(zip(self.draws, self.estimates)):
            yield [i, *draw.mu.tolist(), *draw.sigma[iu].tolist(), est.probability, est.skipped]

    def header(self):
        n = len(self.draws[0].mu)
        r, c = np.triu_indices(n)
        return (["sample_id"] + [f"mu_{j}" for j in range(n)]
                + [f"sigma_{a}_{b}" for a, b in zip(r, c)] + ["failure_prob", "skipped"])


def histogram(probabilities, epsilon, bins=HIST_BINS):
    """Equal-width bins over [0, 1.2 eps]; values beyond land in the last bin."""
    edges = np.linspace(0.0, 1.2 * epsilon, bins + 1)
    clipped = np.minimum(np.asarray(probabilities), edges[-1])
    counts, _ = np.histogram(clipped, bins=edges)
    return counts, edges


def _ball(rng, dim, radius):
    # uniform in the Euclidean ball: gaussian direction, radius ~ u^(1/dim)
    v = rng.standard_normal(dim)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return np.zeros(dim)
    return v / nv * radius * rng.random() ** (1.0 / dim)


def _draw_perturbations(unc, rng):
    m, k = unc.m, unc.k
    if unc.norm == LINF:
        z1 = rng.uniform(-unc.alpha, unc.alpha, m)
        low = rng.uniform(-unc.beta, unc.beta, svec_length(k))
        Z2 = np.zeros((k, k))
        Z2[np.tril_indices(k)] = low
        Z2 = Z2 + np.tril(Z2, -1).T
    else:
        z1 = _ball(rng, m, unc.alpha)
        Z2 = smat(_ball(rng, svec_length(k), unc.beta))
    return z1, Z2


def moments_from_draw(unc, z1, Z2):
    """``(mu, Sigma, accepted)`` for given perturbations; accepted iff Sigma is positive definite."""
    mu = unc.mu_tilde + unc.A @ z1
    sigma = unc.sigma_tilde + unc.B @ Z2 @ unc.B.T
    sigma = 0.5 * (sigma + sigma.T)
    return mu, sigma, factor_spd(sigma, check=False)[1]


def sample_moments(unc, rng, max_attempts=MAX_ATTEMPTS):
    """Uniform draw from U_mu x (U_Sigma restricted to positive definite matrices)."""
    for attempt in range(1, max_attempts + 1):
        z1, Z2 = _draw_perturbations(unc, rng)
        mu, sigma, ok = moments_from_draw(unc, z1, Z2)
        if ok:
            return MomentDraw(mu, sigma, attempt)
    raise ConfigurationError(
        f"no positive definite covariance in {max_attempts} draws; sigma_tilde={unc.sigma_tilde.tolist()}, beta={unc.beta}"
    )


def standard_normals(rng, count, n):
    width = n + (n % 2)
    return box_muller(rng.random((count, width)))[:, :n]


def sample_gaussian(mu, sigma, count, rng):
    """``count`` draws of N(mu, Sigma) via Cholesky factor and Box-Muller."""
    mu = np.asarray(mu, dtype=float)
    L, ok = factor_spd(sigma)
    if not ok:
        raise StructuralError("covariance is not positive definite")
    return mu + standard_normals(rng, count, len(mu)) @ L.T


def failure_probability(target, x, mu, sigma, count, rng, exact=False):
    """Fraction of N(mu, Sigma) inputs violating the constraint at design x.

    ``target`` is a :class:`TrussModel` (compliance constraint, linearized at x
    or, with ``exact``, re-solved per sample) or a :class:`LinearizedConstraint`.
    """
    mu = np.asarray(mu, dtype=float)
    if exact:
        if not isinstance(target, TrussModel):
            raise ConfigurationError("exact evaluation needs a truss model")
        L, ok = factor_spd(sigma)
        if not ok:
            raise StructuralError("covariance is not positive definite")
        X = np.asarray(x, dtype=float) + mu + standard_normals(rng, count, len(mu)) @ L.T
        fails, skipped = exact_fail_count(target.directions, target.stiffness, target.load, target.pi_bar, X)
        used = count - skipped
        return FailureEstimate(fails / used if used else float("nan"), fails, count, skipped)
    con = target if isinstance(target, LinearizedConstraint) else constraint_at(target, x)
    L, ok = factor_spd(sigma)
    if not ok:
        raise StructuralError("covariance is not positive definite")
    n = len(mu)
    a = np.zeros(n + (n % 2))
    a[:n] = L.T @ con.gradient
    c0 = con.value + con.gradient @ mu
    fails = linear_fail_count(float(c0), a, rng.random((count, len(a))))
    return FailureEstimate(fails / count, fails, count, 0)


def outer_stream(seed, i):
    """Independent generator for outer sample i."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))


def double_loop(target, x, unc, spec, cfg):
    """Worst-case failure probability estimate over sampled moments."""
    if cfg.exact:
        fixed = target
    else:
        fixed = target if isinstance(target, LinearizedConstraint) else constraint_at(target, x)

    def one(i):
        rng = outer_stream(cfg.seed, i)
        draw = sample_moments(unc, rng)
        est = failure_probability(fixed, x, draw.mu, draw.sigma, cfg.inner, rng, exact=cfg.exact)
        return draw, est

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            out = list(pool.map(one, range(cfg.outer)))
    else:
        out = [one(i) for i in range(cfg.outer)]
    draws = [d for d, _ in out]
    attempts = sum(d.attempts for d in draws)
    if attempts >= MAX_ATTEMPTS and 1.0 - len(draws) / attempts > MAX_REJECTION:
        raise ConfigurationError(
            f"covariance rejection rate {1 - len(draws) / attempts:.4%} over {attempts} draws; "
            f"sigma_tilde={unc.sigma_tilde.tolist()}, beta={unc.beta}"
        )
    result = DoubleLoopResult(draws, [e for _, e in out], spec.epsilon, cfg.inner)
    result.histogram = histogram(result.probabilities, spec.epsilon)
    return result
