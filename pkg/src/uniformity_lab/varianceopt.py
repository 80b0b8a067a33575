"""Variance optimization over separable statistics.

A separable statistic is determined by its table f(k), k = 0..n.  Its exact
variance under the uniform throw of n balls into m bins is m * f^T Q f for
the covariance matrix Q built here from the bin marginal and the pairwise
conditional binomial.  Minimizing that variance subject to a fixed mean gap
toward an alternative marginal is an equality-constrained quadratic program
solved through the pseudoinverse of Q (whose kernel always contains the
constant and linear tables, which contribute nothing to any histogram
statistic's variance).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .errors import DegenerateStatisticError, InvalidParameterError

_KERNEL_CUTOFF = 1e-12


def pbar(n: int, m: int) -> np.ndarray:
    """Marginal pmf of one bin's count under uniform: Binomial(n, 1/m)."""
    if m < 1:
        raise InvalidParameterError("m must be >= 1")
    k = np.arange(n + 1)
    return binom.pmf(k, n, 1.0 / m)


def qbar(n: int, m: int, epsilon: float) -> np.ndarray:
    """Average bin marginal under the balanced (1 +- 2 eps)/m alternative."""
    if epsilon < 0 or (1.0 + 2.0 * epsilon) / m > 1.0 or 1.0 - 2.0 * epsilon < 0:
        raise InvalidParameterError(
            f"need 0 <= epsilon <= 1/2 and (1+2*eps)/m <= 1, got eps={epsilon}, m={m}"
        )
    k = np.arange(n + 1)
    hi = binom.pmf(k, n, (1.0 + 2.0 * epsilon) / m)
    lo = binom.pmf(k, n, (1.0 - 2.0 * epsilon) / m)
    return 0.5 * (hi + lo)


def alpha_vector(n: int, m: int) -> np.ndarray:
    """alpha_k = (k - lam)^2 - k + lam/m with lam = n/m; E_pbar[alpha] = 0."""
    if m < 1:
        raise InvalidParameterError("m must be >= 1")
    lam = n / m
    k = np.arange(n + 1, dtype=float)
    return (k - lam) ** 2 - k + lam / m


def qprime(n: int, m: int, epsilon: float) -> np.ndarray:
    """The order-eps^2 surrogate alternative pbar_k * (1 + 2 eps^2 alpha_k)."""
    pb = pbar(n, m)
    alpha = alpha_vector(n, m)
    factor = 1.0 + 2.0 * epsilon * epsilon * alpha
    if factor.min() < 0:
        raise InvalidParameterError(
            f"1 + 2*eps^2*alpha_k dips to {factor.min():g} < 0; epsilon too large"
        )
    return pb * factor


def build_Q(n: int, m: int) -> np.ndarray:
    """Covariance kernel of one f-table: Var[S_f] = m * f^T Q f exactly.

    Q_kk' = (m-1) pbar_k pbar_{k'|k} - m pbar_k pbar_k' plus pbar_k on the
    diagonal, with pbar_{k'|k} = Binomial(n-k, 1/(m-1), k').  Q annihilates
    constant and linear tables.
    """
    if m < 2:
        raise InvalidParameterError("m must be >= 2")
    pb = pbar(n, m)
    k = np.arange(n + 1)
    cond = binom.pmf(k[None, :], (n - k)[:, None], 1.0 / (m - 1))
    q = (m - 1) * pb[:, None] * cond - m * np.outer(pb, pb)
    q[k, k] += pb
    return 0.5 * (q + q.T)


@dataclass(frozen=True)
class QuadraticProgram:
    """min f^T Q f subject to d . f = 1/m, with d = target marginal - pbar."""

    Q: np.ndarray
    d: np.ndarray
    n: int
    m: int


def _target_marginal(target: str, n: int, m: int, epsilon: float) -> np.ndarray:
    if target == "qbar":
        return qbar(n, m, epsilon)
    if target == "qprime":
        return qprime(n, m, epsilon)
    raise InvalidParameterError(f"target must be 'qbar' or 'qprime', got {target!r}")


def quadratic_program(n: int, m: int, epsilon: float, target: str = "qbar") -> QuadraticProgram:
    return QuadraticProgram(
        Q=build_Q(n, m),
        d=_target_marginal(target, n, m, epsilon) - pbar(n, m),
        n=n,
        m=m,
    )


def variance_of(f, n: int, m: int) -> float:
    """Exact Var[S_f] under uniform: m * f^T Q f."""
    f = np.asarray(f, dtype=float)
    return float(m * f @ build_Q(n, m) @ f)


def nvar(f, n: int, m: int, epsilon: float, target: str = "qbar") -> float:
    """Normalized variance Var_p[S_f] / (E_target[S_f] - E_p[S_f])^2."""
    f = np.asarray(f, dtype=float)
    prog = quadratic_program(n, m, epsilon, target)
    var = m * f @ prog.Q @ f
    gap = m * float(prog.d @ f)
    if gap == 0.0 or abs(gap) < 1e-300:
        raise DegenerateStatisticError("statistic has zero mean gap to the target")
    return float(var) / (gap * gap)


def _pinv_psd(Q: np.ndarray) -> np.ndarray:
    """Pseudoinverse of a symmetric PSD matrix via eigendecomposition."""
    w, v = np.linalg.eigh(Q)
    cutoff = _KERNEL_CUTOFF * w.max()
    inv = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    return (v * inv) @ v.T


def min_nvar(n: int, m: int, epsilon: float, target: str = "qbar") -> tuple[np.ndarray, float]:
    """Variance-minimizing table and its normalized variance.

    The minimizer is f* = Q^+ d / (m d^T Q^+ d), which satisfies the gap
    constraint d . f* = 1/m with the constraint direction projected onto the
    range of Q (constant and linear components of d cannot be realized by
    any statistic's variance and are discarded by the pseudoinverse).
    """
    prog = quadratic_program(n, m, epsilon, target)
    qp = _pinv_psd(prog.Q)
    f_raw = qp @ prog.d
    denom = float(prog.d @ f_raw)  # d^T Q^+ d
    if denom <= 1e-300:
        raise DegenerateStatisticError("constraint direction lies in the kernel of Q")
    f_star = f_raw / (m * denom)
    value = 1.0 / (m * denom)
    return f_star, value


def kkt_residual_quadratic(n: int, m: int) -> float:
    """Relative residual of the stationarity check for the quadratic table.

    r = min_a || Q k^2 - a * (pbar . alpha) ||_2 / || Q k^2 ||_2.  The
    proportionality holds only asymptotically; at finite m the residual
    decays like a power of m.
    """
    Q = build_Q(n, m)
    f = np.arange(n + 1, dtype=float) ** 2
    v = Q @ f
    w = pbar(n, m) * alpha_vector(n, m)
    a = float(v @ w) / float(w @ w)
    return float(np.linalg.norm(v - a * w) / np.linalg.norm(v))
