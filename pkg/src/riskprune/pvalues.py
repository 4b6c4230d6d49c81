"""Super-uniform p-values for the null "risk exceeds alpha".

Three constructions are provided: the exact binomial tail (binary losses only),
the PRW p-value and the Hoeffding-Bentkus p-value (any loss in [0, 1]).  Every
p-value is clamped to (0, 1].
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special, stats

PVALUES = ("binomial", "prw", "hb")
BINARY_ONLY = ("binomial",)

_TINY = np.finfo(np.float64).tiny
# slack for turning n * rhat back into an integer count
_COUNT_EPS = 1e-9


def binom_cdf(k, n, p):
    """P(Bin(n, p) <= k); 0 for k < 0 and 1 for k >= n."""
    k = np.floor(np.asarray(k, dtype=np.float64))
    n = np.asarray(n, dtype=np.int64)
    out = np.where(k < 0, 0.0, np.where(k >= n, 1.0, stats.binom.cdf(k, n, p)))
    return float(out) if out.ndim == 0 else out


def _clamp(p):
    return np.clip(p, _TINY, 1.0)


def _floor_count(n, rhat):
    return np.floor(np.asarray(n) * np.asarray(rhat) + _COUNT_EPS)


def _ceil_count(n, rhat):
    return np.ceil(np.asarray(n) * np.asarray(rhat) - _COUNT_EPS)


def _check(n, rhat, alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if np.any(np.asarray(n) < 1):
        raise ValueError("n must be at least 1")
    r = np.asarray(rhat, dtype=np.float64)
    if np.any((r < 0) | (r > 1)):
        raise ValueError("empirical risk must lie in [0, 1]")
    return r


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def p_binomial(n, rhat, alpha: float):
    """P(Bin(n, alpha) <= n * rhat).  Valid for binary losses."""
    rhat = _check(n, rhat, alpha)
    return _scalar(_clamp(binom_cdf(_floor_count(n, rhat), n, alpha)))


def p_prw(n, rhat, alpha: float):
    rhat = _check(n, rhat, alpha)
    n = np.asarray(n, dtype=np.float64)
    gamma = np.ceil(n * alpha - _COUNT_EPS)
    k = _ceil_count(n, rhat)
    first = rhat < (gamma - 1) / n
    # denominators are positive on the first branch; guard the others
    denom = np.where(first, n * alpha - k, 1.0)
    factor = alpha * (n - k) / denom
    p_first = factor * binom_cdf(k, n, alpha)
    # printed as max{1, ...}, which is >= 1 and clamps to 1
    p = np.where(first, p_first, 1.0)
    return _scalar(_clamp(p))


def h1(a, b):
    """KL divergence between Bernoulli(a) and Bernoulli(b), with 0 log 0 = 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = special.xlogy(a, a / b) + special.xlogy(1 - a, (1 - a) / (1 - b))
    out = np.where((b == 0) & (a > 0), np.inf, out)
    out = np.where((b == 1) & (a < 1), np.inf, out)
    return _scalar(out)


def hoeffding_term(n, rhat, alpha: float):
    return _scalar(np.exp(-np.asarray(n) * h1(np.minimum(rhat, alpha), alpha)))


def bentkus_term(n, rhat, alpha: float):
    return _scalar(math.e * np.asarray(binom_cdf(_ceil_count(n, rhat), n, alpha)))


def p_hb(n, rhat, alpha: float):
    """Hoeffding-Bentkus p-value: the smaller of the two tail bounds."""
    rhat = _check(n, rhat, alpha)
    p = np.minimum(bentkus_term(n, rhat, alpha), hoeffding_term(n, rhat, alpha))
    return _scalar(_clamp(p))


_FUNCS = {"binomial": p_binomial, "prw": p_prw, "hb": p_hb}


def pvalue(kind: str, n, rhat, alpha: float):
    """Dispatch by name.  ``nan`` risks (nothing to test) map to p = 1."""
    try:
        func = _FUNCS[kind]
    except KeyError:
        raise ValueError(f"unknown p-value {kind!r}; choose from {PVALUES}") from None
    rhat = np.asarray(rhat, dtype=np.float64)
    n = np.asarray(n)
    undefined = np.isnan(rhat) | (n < 1)
    if not undefined.any():
        return func(n, rhat, alpha)
    p = func(np.where(undefined, 1, n), np.where(undefined, 1.0, rhat), alpha)
    return _scalar(np.where(undefined, 1.0, p))


def pvalue_table(kind: str, n: int, alpha: float) -> np.ndarray:
    """p-values for every attainable binary count ``0..n`` (index = count)."""
    return np.asarray(pvalue(kind, n, np.arange(n + 1) / n, alpha))


def check_compatible(loss: str, kind: str) -> None:
    """Reject the binomial p-value for non-binary losses."""
    from .losses import BINARY_LOSSES

    if kind not in PVALUES:
        raise ValueError(f"unknown p-value {kind!r}; choose from {PVALUES}")
    if kind in BINARY_ONLY and loss not in BINARY_LOSSES:
        raise ValueError(
            f"the {kind} p-value requires a binary loss; {loss!r} is bounded but not binary "
            f"(use prw or hb)"
        )
