"""Uniformity-testing laboratory: separable test statistics with the
thresholds that balance their error exponents, exact small-case oracles,
variance-optimal statistic computation, closed-form rate functions and
sample sizes, depoissonization numerics, and a deterministic parallel
Monte Carlo harness."""

from . import (  # noqa: F401
    distmodel,
    exponents,
    mc,
    mgfnumeric,
    oracle,
    statistics,
    varianceopt,
)

__version__ = "0.1.0"
