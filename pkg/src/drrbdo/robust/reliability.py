"""Standard normal distribution function, its inverse, and the safety factor kappa."""
import math
from dataclasses import dataclass

GAUSSIAN = "gaussian"
ALL = "all"
FAMILIES = (GAUSSIAN, ALL)

_SQRT_PI = math.sqrt(math.pi)
_SQRT2 = math.sqrt(2.0)


def erfc(x):
    """Complementary error function.

    Power series ``erf(x) = 2/sqrt(pi) exp(-x^2) sum 2^n x^(2n+1) / (2n+1)!!``
    (all terms positive) for |x| < 2, Lentz continued fraction beyond.
    """
    x = float(x)
    if math.isnan(x):
        return math.nan
    if x < 0:
        return 2.0 - erfc(-x)
    if x < 2.0:
        term = x
        total = x
        x2 = x * x
        n = 0
        while term > 1e-17 * total:
            n += 1
            term *= 2.0 * x2 / (2 * n + 1)
            total += term
        return 1.0 - 2.0 / _SQRT_PI * math.exp(-x2) * total
    if x > 27.3:
        return 0.0
    # erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    tiny = 1e-300
    f = x
    C = x
    D = 0.0
    for k in range(1, 500):
        a = k / 2.0
        D = x + a * D
        D = tiny if D == 0.0 else D
        C = x + a / C
        C = tiny if C == 0.0 else C
        D = 1.0 / D
        delta = C * D
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x * x) / (_SQRT_PI * f)


def normal_cdf(x):
    return 0.5 * erfc(-x / _SQRT2)


def _normal_pdf(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def normal_quantile(p):
    """Inverse of :func:`normal_cdf`, accurate to |cdf(q) - p| <= 1e-12."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -normal_quantile(1.0 - p) if 1.0 - p > 0 else math.inf
    # lower tail: Newton/Halley on log-free residual, safeguarded by bisection
    t = math.sqrt(-2.0 * math.log(p))
    x = -(t - (2.515517 + 0.802853 * t + 0.010328 * t * t) / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t ** 3))
    lo, hi = -40.0, 0.0
    for _ in range(100):
        r = normal_cdf(x) - p
        if r > 0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        pdf = _normal_pdf(x)
        if pdf > 0:
            u = r / pdf
            step = u / (1.0 + 0.5 * x * u)
            xn = x - step
        else:
            xn = math.nan
        if abs(xn - x) <= 1e-15 * max(1.0, abs(x)):
            x = xn
            break
        if not lo <= xn <= hi:
            xn = 0.5 * (lo + hi)
        x = xn
    return x


def kappa(epsilon, family=GAUSSIAN):
    """Safety factor multiplying the standard deviation of the linearized constraint."""
    epsilon = float(epsilon)
    if family == GAUSSIAN:
        if not 0.0 < epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1) for the gaussian family, got {epsilon}")
        return -normal_quantile(epsilon)
    if family == ALL:
        if not 0.0 < epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1] for the distribution-free family, got {epsilon}")
        return math.sqrt((1.0 - epsilon) / epsilon)
    raise ValueError(f"unknown distribution family {family!r}")


@dataclass(frozen=True)
class ReliabilitySpec:
    epsilon: float
    family: str = GAUSSIAN

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown distribution family {self.family!r}")
        kappa(self.epsilon, self.family)

    @property
    def kappa(self):
        return kappa(self.epsilon, self.family)

    def check_robust(self):
        """Robust reformulation needs kappa > 0."""
        if self.kappa <= 0.0:
            raise ValueError(
                f"epsilon={self.epsilon} gives kappa={self.kappa:.3g} <= 0 for family {self.family!r}; "
                "robust runs need epsilon < 0.5 (gaussian) or epsilon < 1 (all)"
            )
        return self
