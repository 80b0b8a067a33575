"""Closed-form rate functions, balanced error exponents, sample-size
calculators, and regime classification.

Rate functions are on the scale where the failure probability decays like
exp(-rate * n^2 eps^4 / m).  The "sublinear" forms apply to the Huber and
squared statistics; the "empty" forms to the empty-bins (equivalently TV,
for n <= m) statistic, parameterized by alpha = n/m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParameterError, OutOfDomainError, OutOfValidityError

_TV_FIXED_POINT_TOL = 1e-6
_TV_FIXED_POINT_MAX_ITER = 200


def rate_uniform_sublinear(tau: float) -> float:
    """Uniform-side exponent tau^2 / 4 for the Huber/squared statistic."""
    if tau <= 0:
        raise OutOfDomainError("tau must be > 0")
    return tau * tau / 4.0


def rate_alternative_sublinear(tau: float, gamma: float) -> float:
    """Alternative-side exponent (tau g(g-1) + 1)^2 / (4 g^2 (g-1)^2)."""
    if not 0.0 < gamma < 1.0:
        raise OutOfDomainError("gamma must lie in (0, 1)")
    gg = gamma * (gamma - 1.0)
    if not 0.0 <= tau < 1.0 / (gamma * (1.0 - gamma)):
        raise OutOfDomainError(f"tau must lie in [0, {1.0 / (gamma * (1.0 - gamma))})")
    return (tau * gg + 1.0) ** 2 / (4.0 * gg * gg)


def rate_uniform_empty(tau: float, alpha: float) -> float:
    """Uniform-side exponent for empty bins at alpha = n/m."""
    if tau <= 0:
        raise OutOfDomainError("tau must be > 0")
    if alpha <= 0:
        raise OutOfDomainError("alpha must be > 0")
    return (
        tau * tau * alpha * alpha * math.exp(2.0 * alpha)
        / (2.0 * math.exp(alpha) - 2.0 - 2.0 * alpha)
    )


def rate_alternative_empty(tau: float, alpha: float, gamma: float) -> float:
    """Alternative-side exponent for empty bins at alpha = n/m."""
    if alpha <= 0:
        raise OutOfDomainError("alpha must be > 0")
    if not 0.0 < gamma < 1.0:
        raise OutOfDomainError("gamma must lie in (0, 1)")
    if not 0.0 <= tau < math.exp(-alpha) / (2.0 * gamma * (1.0 - gamma)):
        raise OutOfDomainError(
            f"tau must lie in [0, {math.exp(-alpha) / (2.0 * gamma * (1.0 - gamma))})"
        )
    gg = gamma * (gamma - 1.0)
    num = alpha * alpha * (2.0 * tau * math.exp(alpha) * gg + 1.0) ** 2
    den = 8.0 * (math.exp(alpha) - 1.0 - alpha) * gg * gg
    return num / den


def error_exponent(kind_name: str, alpha: float) -> float:
    """Balanced exponent at the default threshold.

    Huber/squared/collisions achieve 1 for any alpha; empty bins (and TV)
    achieve alpha^2 / (2 (e^alpha - 1 - alpha)), which tends to 1 as
    alpha -> 0.
    """
    if kind_name in ("huber", "squared", "collisions"):
        return 1.0
    if kind_name in ("empty_bins", "tv"):
        if alpha <= 0:
            raise OutOfDomainError("alpha must be > 0")
        return alpha * alpha / (2.0 * (math.exp(alpha) - 1.0 - alpha))
    raise OutOfDomainError(f"no error exponent for kind {kind_name!r}")


def tv_sample_constant(alpha: float) -> float:
    """Sample-size constant sqrt(2 (e^a - 1 - a)) / a of the TV tester."""
    if alpha <= 0:
        raise OutOfDomainError("alpha must be > 0")
    return math.sqrt(2.0 * (math.exp(alpha) - 1.0 - alpha)) / alpha


def gaussian_delta(nvar: float) -> float:
    """Gaussian-approximation failure probability exp(-1 / (8 nvar))."""
    if nvar <= 0:
        raise InvalidParameterError("nvar must be > 0")
    return math.exp(-1.0 / (8.0 * nvar))


def nvar_closed_form(kind_name: str, n: int, m: int, epsilon: float) -> float:
    """Leading-order normalized variance of the quadratic or TV statistic."""
    if n < 1 or m < 1 or epsilon <= 0:
        raise InvalidParameterError("need n >= 1, m >= 1, epsilon > 0")
    base = m / (epsilon**4 * n * n)
    if kind_name in ("huber", "squared", "collisions"):
        return base / 8.0
    if kind_name in ("empty_bins", "tv"):
        alpha = n / m
        return base * (math.exp(alpha) - 1.0 - alpha) / (4.0 * alpha * alpha)
    raise OutOfDomainError(f"no closed-form nvar for kind {kind_name!r}")


def _gausspos_neg(m: int, epsilon: float, delta_minus: float, delta_plus: float) -> float:
    half = (math.sqrt(math.log(1.0 / delta_plus)) + math.sqrt(math.log(1.0 / delta_minus))) / 2.0
    return math.sqrt(m) * half / (epsilon * epsilon)


def sample_size(
    m: int, epsilon: float, delta_minus: float, delta_plus: float, kind_name: str
) -> int:
    """Samples needed for the target false negative/positive probabilities.

    Huber/squared/collisions use the Gaussian-optimal
    sqrt(m) (sqrt(ln 1/d+) + sqrt(ln 1/d-)) / (2 eps^2); the TV tester
    multiplies by its alpha-dependent constant, solved as a fixed point in n
    and only valid while the solution stays at or below m; the superlinear
    rule is 2 ln(1/d) / eps^2 with d = max(d+, d-).
    """
    if not (0.0 < delta_minus < 1.0 and 0.0 < delta_plus < 1.0):
        raise InvalidParameterError("delta_minus and delta_plus must lie in (0, 1)")
    if not 0.0 < epsilon < 1.0:
        raise InvalidParameterError("epsilon must lie in (0, 1)")
    if kind_name in ("huber", "squared", "collisions"):
        return math.ceil(_gausspos_neg(m, epsilon, delta_minus, delta_plus))
    if kind_name == "superlinear":
        delta = max(delta_minus, delta_plus)
        return math.ceil(2.0 * math.log(1.0 / delta) / (epsilon * epsilon))
    if kind_name in ("tv", "empty_bins"):
        n_quad = _gausspos_neg(m, epsilon, delta_minus, delta_plus)
        n = n_quad
        for _ in range(_TV_FIXED_POINT_MAX_ITER):
            proposal = tv_sample_constant(n / m) * n_quad
            new_n = 0.5 * (n + proposal)
            converged = abs(new_n - n) <= _TV_FIXED_POINT_TOL * new_n
            n = new_n
            if n > 4.0 * m:
                raise OutOfValidityError(
                    f"TV fixed point exceeds n = m = {m}; TV analysis only holds for n <= m"
                )
            if converged:
                break
        else:
            raise OutOfValidityError("TV sample-size fixed point did not converge")
        if n > m:
            raise OutOfValidityError(
                f"TV fixed point n = {n:.6g} exceeds m = {m}; only valid for n <= m"
            )
        return math.ceil(n)
    raise OutOfDomainError(f"no sample-size formula for kind {kind_name!r}")


@dataclass(frozen=True)
class RegimeReport:
    """Where (n, m, eps, delta) sits relative to the testers' theory."""

    label: str  # superlinear | sublinear | impossible-leaning
    huber_applicable: bool
    collisions_window: bool
    paninski_fails: bool
    peebles_regime: bool
    n_over_m: float
    gauss_exponent: float  # n^2 eps^4 / m


def regime(n: int, m: int, epsilon: float, delta: float) -> RegimeReport:
    """Classify the parameter point, with factor-10 margins on the
    asymptotic boundaries.

    superlinear: n/m at least 10x beyond 1/eps^2; impossible-leaning:
    n^2 eps^4 / m below 1/10, where even the Gaussian approximation cannot
    push the failure probability down; sublinear otherwise.
    """
    if n < 1 or m < 1 or epsilon <= 0 or delta <= 0:
        raise InvalidParameterError("all parameters must be positive")
    ratio = n / m
    inv_eps_sq = 1.0 / (epsilon * epsilon)
    gauss = n * n * epsilon**4 / m
    if ratio >= 10.0 * inv_eps_sq:
        label = "superlinear"
    elif gauss <= 0.1:
        label = "impossible-leaning"
    else:
        label = "sublinear"
    log_inv_delta = math.log(1.0 / delta)
    return RegimeReport(
        label=label,
        huber_applicable=(ratio <= 0.1 * inv_eps_sq and m >= 30.0 * math.log(n)),
        collisions_window=(math.log(n) <= log_inv_delta <= n ** (1.0 / 13.0)),
        paninski_fails=(n >= 48.0 * m * math.log(m)),
        peebles_regime=(epsilon >= math.log(n) ** 0.25 / n**0.125),
        n_over_m=ratio,
        gauss_exponent=gauss,
    )


def peebles_bound(n: int, m: int) -> float:
    """Natural-log exponent -(4n/sqrt(m)) ln n of the collisions-tester
    failure floor (a single bin swallowing 4n/sqrt(m) samples)."""
    if n < 2 or m < 2:
        raise InvalidParameterError("need n, m >= 2")
    return -(4.0 * n / math.sqrt(m)) * math.log(n)
