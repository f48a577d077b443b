"""Coefficient schedules tying constraint tightening to sample size.

Two families of guarantees are covered. The covariance family inflates the
sample covariance by kappa and pads the constraint with phi times the
support radius; it needs a decay exponent p > 2 and a minimum sample count
before any finite kappa exists. The mean family (independent coordinates,
known variances not required) replaces kappa with an additive log term nu
and works for any p > 0. Each family has an explicit-p form and an auto-p
form whose p is chosen so the sample-size condition holds with equality
margin sqrt(N); the auto forms are algebraically exact specializations of
the explicit ones.

All conditions are evaluated in log space so large N never overflows.
Exponentials of large negative arguments flush to zero, which only pushes
kappa to 1 and nu to 0 from above (the conservative direction is kept by
construction, not by rounding).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ScheduleResult:
    """Coefficients for one (N, alpha) point.

    kappa is the covariance inflation (None when the family does not use it
    or the sample-size condition fails); nu is the additive mean-family
    term (same convention); phi multiplies the support radius and is always
    defined. feasible reports the sample-size condition.
    """

    method: str
    n: int
    alpha: float
    p: float | None
    feasible: bool
    kappa: float | None
    phi: float
    nu: float | None


@dataclass(frozen=True)
class ComparisonConstants:
    general: float
    independent: float
    gaussian: float


@dataclass(frozen=True)
class ConfidenceBounds:
    mean: float
    cov: float
    mean_independent: float
    condition_ok: bool


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0,1), got {alpha}")
    return alpha


def _check_n(n: int) -> int:
    n = int(n)
    if n < 1:
        raise ValueError(f"sample count must be positive, got {n}")
    return n


def schedule_cov(n: int, alpha: float, p: float) -> ScheduleResult:
    """Covariance-family coefficients at an explicit decay exponent p > 2."""
    n = _check_n(n)
    alpha = _check_alpha(alpha)
    p = float(p)
    if p <= 2.0:
        raise ValueError(f"covariance schedule needs p > 2, got {p}")
    log_base = math.log(2.0 + math.sqrt(2.0 * math.log(4.0 / alpha)))
    feasible = math.log(n) > p * log_base
    phi = n ** (1.0 / p - 0.5)
    kappa = None
    if feasible:
        t = n ** (1.0 / p)
        # (4/alpha) exp(-(t-2)^2/2) < 1 exactly when feasible
        inner = math.exp(math.log(4.0 / alpha) - 0.5 * (t - 2.0) ** 2)
        kappa = 1.0 / math.sqrt(1.0 - inner)
    return ScheduleResult("cov", n, alpha, p, feasible, kappa, phi, None)


def schedule_cov_auto(n: int, alpha: float) -> ScheduleResult:
    """Covariance-family coefficients with the built-in choice of p."""
    n = _check_n(n)
    alpha = _check_alpha(alpha)
    root = math.sqrt(n)
    # condition sqrt(16 N / exp((sqrt(N)-2)^2)) < alpha, in logs
    feasible = 0.5 * (math.log(16.0 * n) - (root - 2.0) ** 2) < math.log(alpha)
    kappa = math.sqrt(root / (root - 1.0)) if n >= 2 else None
    phi = (2.0 + math.sqrt(2.0 * math.log(4.0 * root / alpha))) / root
    return ScheduleResult("cov_auto", n, alpha, None, feasible, kappa, phi, None)


def min_samples_cov_auto(alpha: float) -> int:
    """Smallest N for which the auto covariance schedule is usable."""
    alpha = _check_alpha(alpha)
    for n in range(1, 10**9):
        if schedule_cov_auto(n, alpha).feasible:
            return n
    raise RuntimeError("no feasible sample count below 1e9")


def schedule_mean(n: int, alpha: float, p: float) -> ScheduleResult:
    """Mean-family coefficients at an explicit decay exponent p > 0."""
    n = _check_n(n)
    alpha = _check_alpha(alpha)
    p = float(p)
    if p <= 0.0:
        raise ValueError(f"mean schedule needs p > 0, got {p}")
    log_base = math.log(2.0 + math.sqrt(2.0 * math.log(1.0 / alpha)))
    feasible = math.log(n) > p * log_base
    phi = n ** (1.0 / p - 0.5)
    nu = None
    if feasible:
        g = 0.5 * (n ** (1.0 / p) - 2.0) ** 2
        if g > 700.0:  # alpha*exp(g) overflows; the -1 is negligible there
            nu = 0.5 * math.log1p((1.0 - alpha) / alpha * math.exp(-g))
        else:
            nu = 0.5 * math.log1p((1.0 - alpha) / (alpha * math.exp(g) - 1.0))
    return ScheduleResult("mean", n, alpha, p, feasible, None, phi, nu)


def schedule_mean_auto(n: int, alpha: float) -> ScheduleResult:
    """Mean-family coefficients with the built-in choice of p; any N >= 2."""
    n = _check_n(n)
    alpha = _check_alpha(alpha)
    root = math.sqrt(n)
    feasible = n >= 2
    nu = 0.5 * math.log1p((1.0 - alpha) / (root - 1.0)) if feasible else None
    phi = (2.0 + math.sqrt(2.0 * math.log(root / alpha))) / root
    return ScheduleResult("mean_auto", n, alpha, None, feasible, None, phi, nu)


def auto_p_cov(n: int, alpha: float) -> float:
    """The exponent the auto covariance schedule implicitly uses."""
    n = _check_n(n)
    alpha = _check_alpha(alpha)
    base = 2.0 + math.sqrt(2.0 * math.log(4.0 * math.sqrt(n) / alpha))
    return math.log(n) / math.log(base)


def auto_p_mean(n: int, alpha: float) -> float:
    """The exponent the auto mean schedule implicitly uses."""
    n = _check_n(n)
    alpha = _check_alpha(alpha)
    base = 2.0 + math.sqrt(2.0 * math.log(math.sqrt(n) / alpha))
    return math.log(n) / math.log(base)


def matches_explicit(n: int, alpha: float, family: str, rel_tol: float = 1e-12) -> bool:
    """Whether the auto schedule reproduces the explicit one at its own p."""
    if family == "cov":
        auto = schedule_cov_auto(n, alpha)
        explicit = schedule_cov(n, alpha, auto_p_cov(n, alpha))
        pairs = [(auto.kappa, explicit.kappa), (auto.phi, explicit.phi)]
    elif family == "mean":
        auto = schedule_mean_auto(n, alpha)
        explicit = schedule_mean(n, alpha, auto_p_mean(n, alpha))
        pairs = [(auto.nu, explicit.nu), (auto.phi, explicit.phi)]
    else:
        raise ValueError(f"family must be 'cov' or 'mean', got {family!r}")
    if not (auto.feasible and explicit.feasible):
        return False
    return all(
        a is not None
        and b is not None
        and math.isclose(a, b, rel_tol=rel_tol, abs_tol=1e-300)
        for a, b in pairs
    )


def alpha_tilde(alpha: float, epsilon: float) -> float:
    """Violation level left after discarding an epsilon mass of samples."""
    alpha = _check_alpha(alpha)
    epsilon = float(epsilon)
    if not 0.0 <= epsilon < alpha:
        raise ValueError(f"epsilon must lie in [0, alpha), got {epsilon}")
    return (alpha - epsilon) / (1.0 - epsilon)


def comparison_constants(alpha: float) -> ComparisonConstants:
    """Safety factors of the three moment-based constraint families.

    general covers arbitrary correlation, independent assumes independent
    coordinates, gaussian assumes a known normal distribution.
    """
    alpha = _check_alpha(alpha)
    return ComparisonConstants(
        general=math.sqrt((1.0 - alpha) / alpha),
        independent=math.sqrt(0.5 * math.log(1.0 / alpha)),
        gaussian=norm_ppf(1.0 - alpha),
    )


def confidence_bounds(
    r: float, n: int, delta: float, widened_mean: bool = False
) -> ConfidenceBounds:
    """High-probability moment-error radii for supports of radius r.

    mean and cov hold jointly with probability 1 - delta for the full
    covariance estimate; mean_independent is the per-coordinate version.
    condition_ok reports the sample-size requirement attached to cov.
    widened_mean trades the mean radius's log(2/delta) for log(4/delta),
    the looser constant some composed guarantees use.
    """
    r = float(r)
    n = _check_n(n)
    delta = float(delta)
    if r < 0.0:
        raise ValueError("support radius must be nonnegative")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0,1), got {delta}")
    root = math.sqrt(n)
    mean_num = 4.0 if widened_mean else 2.0
    mean = (r / root) * (2.0 + math.sqrt(2.0 * math.log(mean_num / delta)))
    cov_factor = 2.0 + math.sqrt(2.0 * math.log(4.0 / delta))
    cov = (2.0 * r * r / root) * cov_factor
    mean_ind = (r / root) * (2.0 + math.sqrt(2.0 * math.log(1.0 / delta)))
    return ConfidenceBounds(mean, cov, mean_ind, n >= cov_factor**2)


# Inverse standard normal CDF: rational approximation (Acklam) polished by
# one Halley step, absolute error well below 1e-8 across (0, 1).

_PPF_A = (
    -3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
    1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00,
)
_PPF_B = (
    -5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
    6.680131188771972e+01, -1.328068155288572e+01,
)
_PPF_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
    -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00,
)
_PPF_D = (
    7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
    3.754408661907416e+00,
)


def norm_ppf(q: float) -> float:
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0,1), got {q}")
    low, high = 0.02425, 1.0 - 0.02425
    if q < low:
        u = math.sqrt(-2.0 * math.log(q))
        a, b, c, d, e, f = _PPF_C
        g, h, i, j = _PPF_D
        x = (((((a * u + b) * u + c) * u + d) * u + e) * u + f) / (
            (((g * u + h) * u + i) * u + j) * u + 1.0
        )
    elif q > high:
        u = math.sqrt(-2.0 * math.log(1.0 - q))
        a, b, c, d, e, f = _PPF_C
        g, h, i, j = _PPF_D
        x = -(((((a * u + b) * u + c) * u + d) * u + e) * u + f) / (
            (((g * u + h) * u + i) * u + j) * u + 1.0
        )
    else:
        u = q - 0.5
        r = u * u
        a, b, c, d, e, f = _PPF_A
        g, h, i, j, k = _PPF_B
        x = (((((a * r + b) * r + c) * r + d) * r + e) * r + f) * u / (
            ((((g * r + h) * r + i) * r + j) * r + k) * r + 1.0
        )
    # Halley refinement against the true CDF
    err = 0.5 * math.erfc(-x / math.sqrt(2.0)) - q
    u = err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)
