"""Deterministic, parallel Monte Carlo estimation of tester failure rates.

Each trial's random stream is keyed by a 64-bit mix of (master_seed,
trial_index), so results are byte-identical no matter how trials are
partitioned across worker processes.  All testers in a run are evaluated on
the same histogram per trial (common random numbers), which sharpens
between-tester comparisons.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .distmodel import ProbabilityVector, flat_alternative, sample_histogram, uniform
from .errors import InvalidParameterError
from .statistics import (
    COLLISIONS,
    TV,
    TesterSpec,
    default_beta,
    default_threshold,
    f_table,
    huber,
    rescaled_value,
)

Side = Literal["uniform", "alternative"]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# 95% and 99.9% two-sided normal quantiles
WILSON_Z_95 = 1.959963984540054
WILSON_Z_999 = 3.2905267314918945


def trial_seed(master_seed: int, trial_index: int) -> int:
    """64-bit mix of (master_seed, trial_index): a splitmix64 finalizer over
    a golden-ratio stride, independent of any trial partitioning."""
    x = (master_seed ^ ((trial_index + 1) * _GOLDEN)) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def wilson_interval(failures: int, trials: int, z: float = WILSON_Z_95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (sane at delta ~ 1e-4,
    where the Wald interval collapses)."""
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    if not 0 <= failures <= trials:
        raise InvalidParameterError("failures must lie in [0, trials]")
    phat = failures / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2.0 * trials)) / denom
    half = (z / denom) * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials))
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class ExperimentConfig:
    tester: TesterSpec
    dist_p: ProbabilityVector
    dist_q: ProbabilityVector
    trials: int
    master_seed: int
    workers: int = 1


@dataclass(frozen=True)
class ErrorEstimate:
    """A failure-rate estimate with its 95% Wilson interval."""

    failures: int
    trials: int
    delta_hat: float
    ci_low: float
    ci_high: float
    seed: int


def _count_failures_chunk(args) -> np.ndarray:
    """Failures per tester over trials [start, stop); top-level for pickling."""
    testers, probs, side, start, stop, master_seed = args
    dist = ProbabilityVector(probs)
    n = testers[0].n
    m = testers[0].m
    tables = [f_table(spec.kind, n, m) for spec in testers]
    failures = np.zeros(len(testers), dtype=np.int64)
    for index in range(start, stop):
        hist = sample_histogram(dist, n, trial_seed(master_seed, index))
        occupancy = np.bincount(hist.counts)
        for t, spec in enumerate(testers):
            s = float(tables[t][: occupancy.size] @ occupancy)
            st = rescaled_value(spec.kind, s, n, m, spec.epsilon)
            rejected = st >= spec.threshold
            if rejected == (side == "uniform"):
                failures[t] += 1
    return failures


def run_testers(
    testers: Sequence[TesterSpec],
    dist: ProbabilityVector,
    side: Side,
    trials: int,
    master_seed: int,
    workers: int = 1,
) -> np.ndarray:
    """Failure counts per tester, all testers sharing each trial's histogram.

    A failure is rejecting on the uniform side or accepting on the
    alternative side.  The result is independent of ``workers``.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    if not testers:
        raise InvalidParameterError("need at least one tester")
    n, m = testers[0].n, testers[0].m
    for spec in testers:
        if (spec.n, spec.m) != (n, m):
            raise InvalidParameterError("all testers in a run must share (n, m)")
    if dist.m != m:
        raise InvalidParameterError("distribution length differs from testers' m")
    if side not in ("uniform", "alternative"):
        raise InvalidParameterError(f"side must be 'uniform' or 'alternative', got {side!r}")
    workers = max(1, workers)
    probs = np.asarray(dist.probs)
    if workers == 1 or trials < 2 * workers:
        return _count_failures_chunk((tuple(testers), probs, side, 0, trials, master_seed))
    bounds = np.linspace(0, trials, workers + 1, dtype=int)
    jobs = [
        (tuple(testers), probs, side, int(bounds[w]), int(bounds[w + 1]), master_seed)
        for w in range(workers)
        if bounds[w] < bounds[w + 1]
    ]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_count_failures_chunk, jobs))
    return np.sum(parts, axis=0)


def estimate_error(
    spec: TesterSpec,
    dist: ProbabilityVector,
    hypothesis: Side,
    trials: int,
    master_seed: int,
    workers: int = 1,
) -> ErrorEstimate:
    """Monte Carlo failure-rate estimate for one tester on one side."""
    failures = int(run_testers([spec], dist, hypothesis, trials, master_seed, workers)[0])
    lo, hi = wilson_interval(failures, trials)
    return ErrorEstimate(
        failures=failures,
        trials=trials,
        delta_hat=failures / trials,
        ci_low=lo,
        ci_high=hi,
        seed=master_seed,
    )


@dataclass(frozen=True)
class RunRow:
    """One (tester, side) result, ready for CSV serialization."""

    tester: str
    n: int
    m: int
    epsilon: float
    gamma: float
    side: str
    trials: int
    failures: int
    delta_hat: float
    ci_low: float
    ci_high: float
    threshold: float
    beta: float
    x_axis: float  # n^2 eps^4 / m
    seed: int


def _side_seed(master_seed: int, side: Side) -> int:
    return trial_seed(master_seed, 0 if side == "uniform" else 1)


def run_experiment(
    named_testers: Sequence[tuple[str, TesterSpec]],
    dist_q: ProbabilityVector,
    gamma: float,
    trials: int,
    master_seed: int,
    workers: int = 1,
) -> list[RunRow]:
    """Both sides for a set of named testers at one (n, m, epsilon)."""
    names = [name for name, _ in named_testers]
    testers = [spec for _, spec in named_testers]
    n, m = testers[0].n, testers[0].m
    rows: list[RunRow] = []
    for side in ("uniform", "alternative"):
        dist = uniform(m) if side == "uniform" else dist_q
        failures = run_testers(
            testers, dist, side, trials, _side_seed(master_seed, side), workers
        )
        for name, spec, fail in zip(names, testers, failures):
            lo, hi = wilson_interval(int(fail), trials)
            rows.append(
                RunRow(
                    tester=name,
                    n=n,
                    m=m,
                    epsilon=spec.epsilon,
                    gamma=gamma,
                    side=side,
                    trials=trials,
                    failures=int(fail),
                    delta_hat=int(fail) / trials,
                    ci_low=lo,
                    ci_high=hi,
                    threshold=spec.threshold,
                    beta=spec.kind.beta if spec.kind.beta is not None else 0.0,
                    x_axis=n * n * spec.epsilon**4 / m,
                    seed=master_seed,
                )
            )
    return rows


def max_failure_by_tester(rows: Sequence[RunRow]) -> dict[str, float]:
    """max(delta_hat over sides) per tester name."""
    worst: dict[str, float] = {}
    for row in rows:
        worst[row.tester] = max(worst.get(row.tester, 0.0), row.delta_hat)
    return worst


def reproduce_intro(trials: int, master_seed: int, workers: int = 1) -> list[RunRow]:
    """The m = n = 10^4, eps = 1/8 comparison of the TV and collisions
    testers against the half-heavy flat alternative, default thresholds."""
    n = m = 10_000
    epsilon = 1.0 / 8.0
    gamma = 0.5
    q = flat_alternative(m, epsilon, gamma).probability_vector()
    named = [
        ("tv", TesterSpec(TV, n, m, epsilon, default_threshold(TV, n, m, epsilon))),
        (
            "collisions",
            TesterSpec(COLLISIONS, n, m, epsilon, default_threshold(COLLISIONS, n, m, epsilon)),
        ),
    ]
    return run_experiment(named, q, gamma, trials, master_seed, workers)


def figure_epsilon(n: int) -> float:
    """The figure experiment's epsilon rule: eps = 0.7 * n^(-1/8.1)."""
    return 0.7 * n ** (-1.0 / 8.1)


def reproduce_figure(
    n_values: Sequence[int], trials: int, master_seed: int, workers: int = 1
) -> list[RunRow]:
    """The m = n, eps = 0.7 n^(-1/8.1) sweep comparing collisions, TV, and
    Huber (default beta, threshold 2) against the half-heavy alternative."""
    rows: list[RunRow] = []
    for n in n_values:
        if not 100 <= n <= 2000:
            raise InvalidParameterError(f"n={n} outside the figure range [100, 2000]")
        m = n
        epsilon = figure_epsilon(n)
        gamma = 0.5
        q = flat_alternative(m, epsilon, gamma).probability_vector()
        beta, _ = default_beta(n, m, epsilon)
        named = [
            (
                "collisions",
                TesterSpec(
                    COLLISIONS, n, m, epsilon, default_threshold(COLLISIONS, n, m, epsilon)
                ),
            ),
            ("tv", TesterSpec(TV, n, m, epsilon, default_threshold(TV, n, m, epsilon))),
            ("huber", TesterSpec(huber(beta), n, m, epsilon, 2.0)),
        ]
        rows.extend(
            run_experiment(named, q, gamma, trials, trial_seed(master_seed, n), workers)
        )
    return rows


def default_workers() -> int:
    """Worker count from UNIFORMITY_LAB_WORKERS, else the CPU count."""
    env = os.environ.get("UNIFORMITY_LAB_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)
