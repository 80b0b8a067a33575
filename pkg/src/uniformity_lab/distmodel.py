"""Distributions on [m], two-level flat alternatives, majorization and
flattening utilities, and deterministic multinomial histogram sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

_SUM_TOL = 1e-12
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ProbabilityVector:
    """A probability distribution over bins 0..m-1.

    Entries are nonnegative and sum to 1 within 1e-12.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise InvalidParameterError("probs must be a nonempty 1-d vector")
        if probs.size and probs.min() < -1e-15:
            raise InvalidParameterError(f"negative probability {probs.min()!r}")
        probs = np.maximum(probs, 0.0)
        total = probs.sum()
        if abs(total - 1.0) > _SUM_TOL:
            raise InvalidParameterError(f"probabilities sum to {total!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def m(self) -> int:
        return self.probs.size

    def __len__(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class FlatFamily:
    """Two-level alternative: the first ``l`` bins carry mass 1/m + eps/l,
    the rest 1/m - eps/(m-l).  Its TV distance to uniform is exactly eps."""

    m: int
    epsilon: float
    gamma: float
    l: int

    @property
    def heavy(self) -> float:
        return 1.0 / self.m + self.epsilon / self.l

    @property
    def light(self) -> float:
        return 1.0 / self.m - self.epsilon / (self.m - self.l)

    def probability_vector(self) -> ProbabilityVector:
        probs = np.full(self.m, self.light)
        probs[: self.l] = self.heavy
        return ProbabilityVector(probs)


@dataclass(frozen=True)
class Histogram:
    """Bin counts of n samples over m bins."""

    counts: np.ndarray
    n: int

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise InvalidParameterError("counts must be a nonempty 1-d vector")
        if counts.min() < 0:
            raise InvalidParameterError("counts must be nonnegative")
        if int(counts.sum()) != self.n:
            raise InvalidParameterError(
                f"counts sum to {int(counts.sum())}, expected n={self.n}"
            )
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def m(self) -> int:
        return self.counts.size


def uniform(m: int) -> ProbabilityVector:
    """The uniform distribution on [m]."""
    if m < 1:
        raise InvalidParameterError("m must be >= 1")
    return ProbabilityVector(np.full(m, 1.0 / m))


def flat_alternative(m: int, epsilon: float, gamma: float) -> FlatFamily:
    """Worst-case flat alternative with l = round(gamma*m) heavy bins.

    The heavy offset eps/l and light offset eps/(m-l) are computed from the
    realized l, so the TV distance to uniform is exactly eps.
    """
    if not 0.0 < gamma < 1.0:
        raise InvalidParameterError("gamma must lie in (0, 1)")
    l = int(round(gamma * m))
    if not 1 <= l <= m - 1:
        raise InvalidParameterError(f"round(gamma*m)={l} outside [1, m-1]")
    if not 0.0 < epsilon <= (m - l) / m + 1e-15:
        raise InvalidParameterError(
            f"epsilon={epsilon} leaves negative light mass (max {(m - l) / m})"
        )
    return FlatFamily(m=m, epsilon=epsilon, gamma=gamma, l=l)


def tv_to_uniform(p: ProbabilityVector) -> float:
    """Total variation distance from p to the uniform distribution."""
    return float(np.maximum(p.probs - 1.0 / p.m, 0.0).sum())


def flatten(p: ProbabilityVector, gamma: float) -> ProbabilityVector:
    """Average p into a gamma-skewed flat distribution majorized by p.

    Averages over T = {j : p_j > 1/m} and its complement when |T| lands in
    [gamma*m, (1-gamma)*m]; otherwise over the largest ceil(gamma*m) or
    floor((1-gamma)*m) coordinates.  The result q satisfies
    (1-gamma)*tv(p) <= tv(q) <= tv(p).
    """
    if not 0.0 < gamma < 0.5:
        raise InvalidParameterError("gamma must lie in (0, 1/2)")
    probs = p.probs
    m = p.m
    heavy = probs > 1.0 / m
    t = int(heavy.sum())
    lo, hi = gamma * m, (1.0 - gamma) * m
    if lo <= t <= hi:
        chosen = heavy
    else:
        size = int(np.ceil(lo)) if t < lo else int(np.floor(hi))
        order = np.argsort(-probs, kind="stable")
        chosen = np.zeros(m, dtype=bool)
        chosen[order[:size]] = True
    out = np.empty(m)
    out[chosen] = probs[chosen].mean()
    out[~chosen] = probs[~chosen].mean()
    return ProbabilityVector(out)


def majorizes(p: ProbabilityVector, q: ProbabilityVector, tol: float = 1e-12) -> bool:
    """True iff every prefix sum of sorted-descending p dominates q's."""
    if p.m != q.m:
        raise InvalidParameterError("majorization requires equal lengths")
    cp = np.cumsum(np.sort(p.probs)[::-1])
    cq = np.cumsum(np.sort(q.probs)[::-1])
    return bool(np.all(cp >= cq - tol))


def sample_histogram(p: ProbabilityVector, n: int, seed: int) -> Histogram:
    """Draw a multinomial(n, p) histogram, deterministic given seed.

    The generator fills bins left to right, each bin receiving a binomial
    draw from the remaining samples and remaining mass (numpy's multinomial
    is this conditional-binomial chain); the underlying stream is the
    counter-based Philox stream keyed by ``seed``.
    """
    if n < 0:
        raise InvalidParameterError("n must be >= 0")
    rng = np.random.Generator(np.random.Philox(key=seed & _MASK64))
    counts = rng.multinomial(n, p.probs)
    return Histogram(counts=counts, n=n)
