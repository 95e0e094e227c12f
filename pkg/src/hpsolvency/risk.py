"""Empirical risk measures and the solvency capital requirement.

Losses are ``-U``. Quantiles use the higher order statistic: VaR at level
alpha is the value at 1-based position ``ceil(alpha * n)`` of the sorted
sample, and TVaR averages the ``n - ceil(alpha * n)`` values above it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np
from numba import njit

from .domain import ValidationError
from .engine.simulate import EmpiricalDistribution
from .rng import DOMAIN_BOOTSTRAP, split_seed, stream_words, uniform

BASES = ("quantile_of_loss", "unexpected_loss")
DEFAULT_ALPHA = 0.995
N_BOOTSTRAP = 200

Sample = Union[EmpiricalDistribution, np.ndarray]


@dataclass(frozen=True)
class RiskConfig:
    alpha: float = DEFAULT_ALPHA
    basis: str = "quantile_of_loss"
    n_bootstrap: int = N_BOOTSTRAP
    seed: int = 0

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.basis not in BASES:
            raise ValidationError(f"scr basis must be one of {BASES}, got {self.basis!r}")
        if int(self.n_bootstrap) < 0:
            raise ValidationError("n_bootstrap must be >= 0")
        split_seed(self.seed)


@dataclass(frozen=True)
class RiskReport:
    alpha: float
    var: float
    tvar: float
    scr_basis: str
    scr: float
    mean_u: float
    se_var: float
    se_tvar: float
    seed: int
    n: int

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "var": self.var,
            "tvar": self.tvar,
            "scr_basis": self.scr_basis,
            "scr": self.scr,
            "mean_u": self.mean_u,
            "se_var": self.se_var if math.isfinite(self.se_var) else None,
            "se_tvar": self.se_tvar if math.isfinite(self.se_tvar) else None,
            "seed": self.seed,
            "n": self.n,
        }


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")


def quantile_position(n: int, alpha: float) -> int:
    """``ceil(alpha * n)`` clamped to ``[1, n]``.

    The product is taken on the decimal value of ``alpha`` (``0.95 * 100``
    is 95, not 95.00000000000001), so positions match the hand count.
    """
    _check_alpha(alpha)
    k = math.ceil(Fraction(repr(float(alpha))) * n)
    return min(max(k, 1), n)


def _sorted_values(dist: Sample) -> np.ndarray:
    if isinstance(dist, EmpiricalDistribution):
        v = dist.values
    else:
        v = np.sort(np.asarray(dist, dtype=float))
    if v.size == 0:
        raise ValidationError("empty distribution")
    if not np.all(np.isfinite(v)):
        raise ValidationError("distribution contains non-finite values")
    return v


def _var_sorted(v: np.ndarray, alpha: float) -> float:
    return float(v[quantile_position(v.shape[0], alpha) - 1])


def _rational_mean(values: np.ndarray) -> Fraction:
    return sum(map(Fraction, values.tolist()), Fraction(0)) / values.shape[0]


def exact_mean(values: np.ndarray) -> float:
    """Correctly rounded mean: the exact rational mean, rounded once.

    A constant sample averages to itself, and a mean never leaves the range
    of its terms, which a sum-then-divide in floats cannot promise.
    """
    return float(_rational_mean(values))


def _tvar_sorted(v: np.ndarray, alpha: float) -> float:
    k = quantile_position(v.shape[0], alpha)
    tail = v[k:]
    if tail.size == 0:
        return float(v[-1])
    return exact_mean(tail)


def var(dist: Sample, alpha: float) -> float:
    """Empirical quantile of ``dist`` at level ``alpha`` (higher order statistic)."""
    return _var_sorted(_sorted_values(dist), alpha)


def tvar(dist: Sample, alpha: float) -> float:
    """Mean of the order statistics above the VaR position; the maximum if there are none."""
    return _tvar_sorted(_sorted_values(dist), alpha)


def loss_sample(dist_u: Sample) -> np.ndarray:
    """Sorted ``-U`` (``0 - U``, so a zero profit is a zero loss rather than -0.0)."""
    return 0.0 - _sorted_values(dist_u)[::-1]


@njit(cache=True)
def _bootstrap(v, k, n_resamples, k0, k1, c1, c3):
    """VaR and TVaR of resamples of the sorted sample ``v``.

    A resample is held as multiplicities over ``v``; since ``v`` is sorted,
    its order statistics follow from cumulative counts without sorting.
    """
    n = v.shape[0]
    out = np.empty((n_resamples, 2))
    counts = np.zeros(n, dtype=np.int64)
    for b in range(n_resamples):
        c2 = np.uint64(b)
        ctr = 0
        for _ in range(n):
            u, ctr = uniform(k0, k1, c1, c2, c3, ctr)
            idx = int(u * n)
            if idx >= n:
                idx = n - 1
            counts[idx] += 1
        # VaR: first position where the cumulative count reaches k
        cum = 0
        pos = 0
        while cum + counts[pos] < k:
            cum += counts[pos]
            pos += 1
        out[b, 0] = v[pos]
        tail = n - k
        if tail == 0:
            last = n - 1
            while counts[last] == 0:
                last -= 1
            out[b, 1] = v[last]
        else:
            s = (cum + counts[pos] - k) * v[pos]
            for a in range(pos + 1, n):
                s += counts[a] * v[a]
            out[b, 1] = s / tail
        for a in range(n):
            counts[a] = 0
    return out


def bootstrap_standard_errors(loss_sorted: np.ndarray, alpha: float, n_resamples: int, seed: int):
    """Bootstrap standard errors of VaR and TVaR.

    Resample ``b`` draws its indices from the substream ``(seed, b)`` of the
    bootstrap domain, so results do not depend on execution order.
    """
    if n_resamples < 2:
        return math.nan, math.nan
    k0, k1 = split_seed(seed)
    c1, _, c3 = stream_words(0, 0, DOMAIN_BOOTSTRAP)
    k = quantile_position(loss_sorted.shape[0], alpha)
    stats = _bootstrap(np.ascontiguousarray(loss_sorted), k, int(n_resamples), k0, k1, c1, c3)
    se = stats.std(axis=0, ddof=1)
    return float(se[0]), float(se[1])


def scr(dist_u: Sample, config: RiskConfig = RiskConfig()) -> RiskReport:
    """Risk report on the loss ``-U``.

    Under ``quantile_of_loss`` the capital is VaR of the loss; under
    ``unexpected_loss`` it is VaR minus the mean loss.
    """
    loss = loss_sample(dist_u)
    v = _var_sorted(loss, config.alpha)
    t = _tvar_sorted(loss, config.alpha)
    mean_u_exact = _rational_mean(_sorted_values(dist_u))
    mean_u = float(mean_u_exact)
    # VaR minus the mean loss, rounded once, so a shift of U cancels exactly
    capital = v if config.basis == "quantile_of_loss" else float(Fraction(v) + mean_u_exact)
    se_v, se_t = bootstrap_standard_errors(loss, config.alpha, config.n_bootstrap, config.seed)
    return RiskReport(
        float(config.alpha), v, t, config.basis, capital, mean_u, se_v, se_t, int(config.seed), int(loss.shape[0])
    )
