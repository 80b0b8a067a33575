"""Separable test statistics, their rescalings, default thresholds, the
Huber crossover selection rule, and accept/reject decisions.

Every statistic here is separable: S = sum_j f(Y_j) over histogram counts.
A tester rescales S to the centered scale used for thresholding and rejects
uniformity when the rescaled value reaches the threshold (ties reject).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .distmodel import Histogram
from .errors import InvalidParameterError, UnsupportedStatisticError

__all__ = [
    "StatisticKind",
    "COLLISIONS",
    "SQUARED",
    "TV",
    "EMPTY_BINS",
    "SINGLETONS",
    "huber",
    "custom",
    "huber_loss",
    "f_table",
    "statistic_value",
    "rescaled_value",
    "default_threshold",
    "BetaDiagnostics",
    "default_beta",
    "TesterSpec",
    "Decision",
    "decide",
    "superlinear_tv_decide",
]


@dataclass(frozen=True)
class StatisticKind:
    """One separable statistic: a name plus its parameters.

    ``beta`` is the Huber crossover; ``table`` holds a custom f(k) for
    k = 0..n.  Use the module constants and the ``huber``/``custom``
    factories rather than constructing instances directly.
    """

    name: str
    beta: float | None = None
    table: tuple[float, ...] | None = None

    def __str__(self) -> str:
        if self.name == "huber":
            return f"huber(beta={self.beta:g})"
        return self.name


COLLISIONS = StatisticKind("collisions")
SQUARED = StatisticKind("squared")
TV = StatisticKind("tv")
EMPTY_BINS = StatisticKind("empty_bins")
SINGLETONS = StatisticKind("singletons")


def huber(beta: float) -> StatisticKind:
    """Huber statistic with crossover beta; beta = 0 is the TV statistic."""
    if beta < 0:
        raise InvalidParameterError("beta must be >= 0")
    if beta == 0:
        return TV
    return StatisticKind("huber", beta=float(beta))


def custom(table) -> StatisticKind:
    """Custom separable statistic from a table of f(k), k = 0..n."""
    return StatisticKind("custom", table=tuple(float(x) for x in table))


def huber_loss(x, beta: float):
    """min(x^2, 2*beta*|x| - beta^2): quadratic core, linear tails.

    This is twice the textbook Huber loss; the two branches agree at
    |x| = beta.  Accepts scalars or arrays.
    """
    if beta < 0:
        raise InvalidParameterError("beta must be >= 0")
    ax = np.abs(x)
    out = np.where(ax < beta, np.square(x), 2.0 * beta * ax - beta * beta)
    if np.isscalar(x):
        return float(out)
    return out


def f_table(kind: StatisticKind, n: int, m: int) -> np.ndarray:
    """Per-count values f(k) for k = 0..n."""
    k = np.arange(n + 1, dtype=float)
    if kind.name == "collisions":
        return k * (k - 1.0) / 2.0
    if kind.name == "squared":
        return np.square(k - n / m)
    if kind.name == "tv":
        return np.abs(k - n / m)
    if kind.name == "empty_bins":
        return (k == 0).astype(float)
    if kind.name == "singletons":
        return (k == 1).astype(float)
    if kind.name == "huber":
        return huber_loss(k - n / m, kind.beta)
    if kind.name == "custom":
        if len(kind.table) < n + 1:
            raise InvalidParameterError(
                f"custom table has {len(kind.table)} entries, needs n+1={n + 1}"
            )
        return np.asarray(kind.table[: n + 1], dtype=float)
    raise InvalidParameterError(f"unknown statistic kind {kind.name!r}")


def statistic_value(kind: StatisticKind, hist: Histogram, n: int, m: int) -> float:
    """S = sum_j f(Y_j) for the given kind."""
    if hist.n != n:
        raise InvalidParameterError(f"histogram has n={hist.n}, expected {n}")
    if hist.m != m:
        raise InvalidParameterError(f"histogram has m={hist.m}, expected {m}")
    table = f_table(kind, n, m)
    occupancy = np.bincount(hist.counts)
    return float(table[: occupancy.size] @ occupancy)


def rescaled_value(kind: StatisticKind, s: float, n: int, m: int, epsilon: float) -> float:
    """Map a raw statistic value onto the centered thresholding scale.

    Huber and squared use (m / (n^2 eps^2)) * (S - n); collisions is first
    mapped to squared through the exact identity S_sq = 2*S_coll + n - n^2/m;
    empty bins centers at m*exp(-n/m).  TV and singletons have no rescaling
    and pass through unchanged (their thresholds live on the raw scale).
    """
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if epsilon <= 0:
        raise InvalidParameterError("epsilon must be > 0")
    if kind.name in ("tv", "singletons"):
        return float(s)
    scale = m / (n * n * epsilon * epsilon)
    if kind.name in ("huber", "squared"):
        return scale * (s - n)
    if kind.name == "collisions":
        s_sq = 2.0 * s + n - n * n / m
        return scale * (s_sq - n)
    if kind.name == "empty_bins":
        return scale * (s - m * math.exp(-n / m))
    raise InvalidParameterError(f"no rescaling for statistic kind {kind.name!r}")


def default_threshold(kind: StatisticKind, n: int, m: int, epsilon: float) -> float:
    """Threshold at which each tester balances its two error exponents.

    Huber, squared, and collisions use 2 on the rescaled scale; empty bins
    uses exp(-n/m) (tending to 1 as n/m -> 0).  The TV tester, which has no
    rescaling, gets the raw-scale threshold that makes it decision-equal to
    the empty-bins rule through the exact identity S_tv = (2n/m) * S_empty,
    valid for n <= m.
    """
    if kind.name in ("huber", "squared", "collisions"):
        return 2.0
    if kind.name == "empty_bins":
        return math.exp(-n / m)
    if kind.name == "tv":
        if n > m:
            raise InvalidParameterError(
                "TV default threshold requires n <= m (empty-bins equivalence)"
            )
        alpha = n / m
        # empty-bins rule S_emp >= m*e^-a + (n^2 eps^2 / m)*e^-a, times 2n/m
        return math.exp(-alpha) * (2.0 * n / m) * (m + n * n * epsilon * epsilon / m)
    raise UnsupportedStatisticError(f"no default threshold for {kind.name!r}")


@dataclass(frozen=True)
class BetaDiagnostics:
    """How the chosen Huber crossover sits against its finite-size bounds."""

    delta: float
    delta_clamped: bool
    third_moment_satisfied: bool
    third_moment_lhs: float  # (beta^2 eps^2)^3
    third_moment_rhs: float  # delta^2


def default_beta(
    n: int, m: int, epsilon: float, K: float = 1.0
) -> tuple[float, BetaDiagnostics]:
    """Huber crossover beta = K * (ln(1/D) + sqrt((n/m) ln(1/D))), D = n eps^2 / m.

    K defaults to 1: larger multipliers push the crossover so far out that
    at experiment scales (n = m <= 10^4) the Huber statistic becomes
    decision-identical to the collisions statistic, losing the clipped
    tail that distinguishes it.  The third-moment condition
    (beta^2 eps^2)^3 <= D^2 is reported in the diagnostics but never
    enforced: it is an asymptotic constraint and is routinely violated at
    finite parameters.
    """
    if K <= 0:
        raise InvalidParameterError("K must be > 0")
    if n < 1 or m < 1 or epsilon <= 0:
        raise InvalidParameterError("need n >= 1, m >= 1, epsilon > 0")
    delta = n * epsilon * epsilon / m
    clamped = False
    if delta >= 1.0:
        warnings.warn(
            f"delta = n*eps^2/m = {delta:g} >= 1; clamping to 1/e", stacklevel=2
        )
        delta = 1.0 / math.e
        clamped = True
    log_inv = math.log(1.0 / delta)
    beta = K * (log_inv + math.sqrt((n / m) * log_inv))
    lhs = (beta * beta * epsilon * epsilon) ** 3
    rhs = delta * delta
    return beta, BetaDiagnostics(
        delta=delta,
        delta_clamped=clamped,
        third_moment_satisfied=lhs <= rhs,
        third_moment_lhs=lhs,
        third_moment_rhs=rhs,
    )


class Decision(Enum):
    UNIFORM = "uniform"
    NONUNIFORM = "non-uniform"


@dataclass(frozen=True)
class TesterSpec:
    """A statistic plus a threshold on its rescaled scale.

    Equality with the threshold rejects (the uniform-side failure event is
    "rescaled value >= threshold").
    """

    kind: StatisticKind
    n: int
    m: int
    epsilon: float
    threshold: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.threshold):
            raise InvalidParameterError("threshold must be finite")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidParameterError("epsilon must lie in (0, 1)")


def decide(spec: TesterSpec, hist: Histogram) -> Decision:
    """UNIFORM iff the rescaled statistic is strictly below the threshold."""
    s = statistic_value(spec.kind, hist, spec.n, spec.m)
    st = rescaled_value(spec.kind, s, spec.n, spec.m, spec.epsilon)
    return Decision.UNIFORM if st < spec.threshold else Decision.NONUNIFORM


def superlinear_tv_decide(hist: Histogram, n: int, m: int, epsilon: float) -> Decision:
    """UNIFORM iff the empirical distribution is within eps/2 of uniform in TV.

    This is the n >> m/eps^2 rule; it equals a raw-scale TV tester with
    threshold n*eps since TV(empirical, uniform) = S_tv / (2n).
    """
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    s = statistic_value(TV, hist, n, m)
    return Decision.UNIFORM if s / (2.0 * n) < epsilon / 2.0 else Decision.NONUNIFORM
