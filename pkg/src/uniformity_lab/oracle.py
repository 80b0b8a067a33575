"""Exact brute-force ground truth on small instances.

Everything here enumerates all C(n+m-1, m-1) histograms of n samples over
m bins and sums multinomial probabilities, so it is exact up to float
rounding.  The enumeration is capped at 1e7 compositions; beyond that the
Monte Carlo harness is the only option.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import gammaln, logsumexp

from .distmodel import Histogram, ProbabilityVector
from .errors import EnumerationTooLargeError, InvalidParameterError
from .statistics import TesterSpec, f_table, rescaled_value

ENUMERATION_CAP = 10**7


@dataclass(frozen=True)
class WeightedOutcome:
    hist: Histogram
    prob: float


def composition_count(n: int, m: int) -> int:
    """Number of histograms of n samples over m bins: C(n+m-1, m-1)."""
    return math.comb(n + m - 1, m - 1)


def histogram_pmf(p: ProbabilityVector, hist: Histogram) -> float:
    """Multinomial probability of a histogram under p, via log-gamma."""
    counts = hist.counts
    if p.m != hist.m:
        raise InvalidParameterError("p and histogram have different lengths")
    log_coef = gammaln(hist.n + 1) - gammaln(counts + 1).sum()
    with np.errstate(divide="ignore"):
        log_p = np.log(p.probs)
    active = counts > 0
    if np.any(active & np.isneginf(log_p)):
        return 0.0
    return float(math.exp(log_coef + float(counts[active] @ log_p[active])))


def _compositions(n: int, m: int) -> Iterator[tuple[int, ...]]:
    """All m-tuples of nonnegative ints summing to n, lexicographic."""
    counts = [0] * m
    def rec(pos: int, remaining: int) -> Iterator[tuple[int, ...]]:
        if pos == m - 1:
            counts[pos] = remaining
            yield tuple(counts)
            return
        for k in range(remaining + 1):
            counts[pos] = k
            yield from rec(pos + 1, remaining - k)
    yield from rec(0, n)


def _weighted_counts(p: ProbabilityVector, n: int) -> Iterator[tuple[tuple[int, ...], float]]:
    """(counts, probability) pairs over the full enumeration under p."""
    m = p.m
    if composition_count(n, m) > ENUMERATION_CAP:
        raise EnumerationTooLargeError(
            f"C({n + m - 1},{m - 1}) = {composition_count(n, m)} exceeds cap {ENUMERATION_CAP}"
        )
    with np.errstate(divide="ignore"):
        log_p = np.log(p.probs)
    lg = gammaln(np.arange(n + 1) + 1)  # lg[k] = ln k!
    log_n_fact = float(lg[n])
    for counts in _compositions(n, m):
        log_prob = log_n_fact
        dead = False
        for k, lp in zip(counts, log_p):
            if k:
                if lp == -np.inf:
                    dead = True
                    break
                log_prob += k * lp - lg[k]
        yield counts, 0.0 if dead else math.exp(log_prob)


def enumerate_histograms(p: ProbabilityVector, n: int) -> list[WeightedOutcome]:
    """Every histogram of n samples over len(p) bins with its probability."""
    return [
        WeightedOutcome(hist=Histogram(counts=np.array(c), n=n), prob=w)
        for c, w in _weighted_counts(p, n)
    ]


def exact_error_rates(
    spec: TesterSpec, p: ProbabilityVector, q: ProbabilityVector
) -> tuple[float, float]:
    """(delta_minus, delta_plus) by exact summation.

    delta_minus = Pr_p[rescaled >= threshold] (false reject of uniform);
    delta_plus = Pr_q[rescaled < threshold] (false accept; ties reject).
    """
    table = f_table(spec.kind, spec.n, spec.m)
    delta_minus = 0.0
    delta_plus = 0.0
    weights_q = {c: w for c, w in _weighted_counts(q, spec.n)}
    for counts, w_p in _weighted_counts(p, spec.n):
        s = sum(table[k] for k in counts)
        st = rescaled_value(spec.kind, s, spec.n, spec.m, spec.epsilon)
        if st >= spec.threshold:
            delta_minus += w_p
        else:
            delta_plus += weights_q[counts]
    return delta_minus, delta_plus


def exact_mgf(
    kind, p: ProbabilityVector, n: int, m: int, epsilon: float, theta: float
) -> float:
    """E[exp(theta * rescaled statistic)] by exact summation."""
    table = f_table(kind, n, m)
    total = 0.0
    for counts, w in _weighted_counts(p, n):
        s = sum(table[k] for k in counts)
        st = rescaled_value(kind, s, n, m, epsilon)
        total += w * math.exp(theta * st)
    return total


def exact_binomial_tail(n: int, p: float, k: int) -> float:
    """Pr[X >= k] for X ~ Binomial(n, p), summed in log space."""
    if not 0 <= k <= n + 1:
        raise InvalidParameterError(f"k={k} outside [0, n+1]")
    if k <= 0:
        return 1.0
    if k == n + 1:
        return 0.0
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    j = np.arange(k, n + 1)
    log_terms = (
        gammaln(n + 1)
        - gammaln(j + 1)
        - gammaln(n - j + 1)
        + j * math.log(p)
        + (n - j) * math.log1p(-p)
    )
    return float(math.exp(logsumexp(log_terms)))
