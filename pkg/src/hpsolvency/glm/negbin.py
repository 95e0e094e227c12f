"""Negative Binomial count regression with a log link."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from ..domain import ValidationError
from .base import (
    MAX_HALVINGS,
    MAX_ITER,
    ConvergenceError,
    FitDiagnostics,
    converged,
    solve_spd,
    std_errors,
)
from .design import ModelSpec

logger = logging.getLogger(__name__)

# Poisson limit: no overdispersion detected.
KAPPA_MAX = 1e8
KAPPA_MIN = 1e-8


@dataclass(frozen=True)
class CountModel:
    spec: ModelSpec
    coefficients: np.ndarray
    dispersion: float
    std_errors: Optional[np.ndarray] = None
    diagnostics: Optional[FitDiagnostics] = None

    def __post_init__(self):
        beta = np.asarray(self.coefficients, dtype=float)
        if beta.shape != (self.spec.width,):
            raise ValidationError(f"count model needs {self.spec.width} coefficients, got {beta.shape}")
        if not self.dispersion > 0:
            raise ValidationError(f"NegBin size parameter must be > 0, got {self.dispersion}")
        object.__setattr__(self, "coefficients", beta)

    def mean(self, X: np.ndarray, exposure=None) -> np.ndarray:
        eta = X @ self.coefficients
        if exposure is not None:
            eta = eta + np.log(exposure)
        return np.exp(eta)


def negbin_loglik(y, mu, kappa) -> float:
    return float(
        np.sum(
            gammaln(y + kappa)
            - gammaln(kappa)
            - gammaln(y + 1.0)
            + kappa * np.log(kappa / (kappa + mu))
            + y * np.log(mu / (kappa + mu))
        )
    )


def pearson_dispersion_update(y, mu, dof: int) -> float:
    """Size parameter at which the Pearson statistic equals the residual degrees of freedom."""
    r2 = (y - mu) ** 2

    def excess(log_kappa):
        k = np.exp(log_kappa)
        return float(np.sum(r2 / (mu * (1.0 + mu / k)))) - dof

    lo, hi = np.log(KAPPA_MIN), np.log(KAPPA_MAX)
    if excess(hi) <= 0.0:
        return KAPPA_MAX
    if excess(lo) >= 0.0:
        return KAPPA_MIN
    return float(np.exp(brentq(excess, lo, hi, xtol=1e-12, rtol=1e-14)))


def _beta_sweep(X, y, offset, beta, kappa):
    """Fisher scoring for beta at fixed kappa, with step-halving."""
    n = X.shape[0]
    eta = X @ beta + offset
    mu = np.exp(eta)
    ll = negbin_loglik(y, mu, kappa)
    for it in range(1, MAX_ITER + 1):
        w = mu / (1.0 + mu / kappa)
        grad = X.T @ ((y - mu) / (1.0 + mu / kappa))
        info = X.T @ (w[:, None] * X)
        step = solve_spd(info, grad)
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = beta + t * step
            eta_c = X @ cand + offset
            if np.all(np.isfinite(eta_c)) and eta_c.max() < 700:
                mu_c = np.exp(eta_c)
                ll_c = negbin_loglik(y, mu_c, kappa)
                if ll_c >= ll - 1e-12 * abs(ll):
                    break
            t *= 0.5
        else:
            raise ConvergenceError("count model: step-halving failed to increase the likelihood")
        ll_old, beta, mu, ll = ll, cand, mu_c, ll_c
        grad = X.T @ ((y - mu) / (1.0 + mu / kappa))
        if converged(ll_old, ll, grad, n):
            return beta, mu, ll, it, grad
    raise ConvergenceError(f"count model did not converge in {MAX_ITER} iterations")


def fit_count_model(
    design: np.ndarray,
    counts,
    exposure=None,
    spec: Optional[ModelSpec] = None,
    max_outer: int = MAX_ITER,
) -> CountModel:
    """Maximum likelihood NegBin regression.

    ``beta`` is fitted by IRLS with the size parameter held fixed; between
    sweeps the size parameter is re-estimated by matching the Pearson
    statistic to ``n - p``. Iteration stops once both settle.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(counts, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise ValidationError(f"design has {n} rows but {y.shape[0]} counts were given")
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise ValidationError("counts must be nonnegative integers")
    if not np.any(y > 0):
        raise ValidationError("degenerate response: all zeros")
    if spec is None:
        if p != 1:
            raise ValidationError("spec is required for designs with covariates")
        spec = ModelSpec(family="neg_binomial")
    if spec.width != p:
        raise ValidationError(f"design has {p} columns, spec expects {spec.width}")
    offset = np.zeros(n) if exposure is None else np.log(np.asarray(exposure, dtype=float))

    rate = y / np.exp(offset)
    beta = np.zeros(p)
    beta[0] = np.log(rate.mean())
    m, v = rate.mean(), rate.var()
    kappa = m * m / (v - m) if v > m else KAPPA_MAX
    kappa = float(np.clip(kappa, KAPPA_MIN, KAPPA_MAX))

    total_iter = 0
    ll = -np.inf
    for _ in range(max_outer):
        beta, mu, ll_new, it, grad = _beta_sweep(X, y, offset, beta, kappa)
        total_iter += it
        kappa_new = pearson_dispersion_update(y, mu, n - p) if n > p else KAPPA_MAX
        settled = abs(kappa_new - kappa) <= 1e-9 * kappa
        kappa = kappa_new
        if settled:
            # final beta at the settled kappa
            beta, mu, ll, it, grad = _beta_sweep(X, y, offset, beta, kappa)
            total_iter += it
            break
        ll = ll_new
    else:
        raise ConvergenceError(f"count model dispersion did not settle in {max_outer} sweeps")

    w = mu / (1.0 + mu / kappa)
    info = X.T @ (w[:, None] * X)
    diag = FitDiagnostics(ll, total_iter, True, float(np.max(np.abs(grad)) / n))
    logger.info("count model: kappa=%.6g loglik=%.6f iterations=%d", kappa, ll, total_iter)
    return CountModel(spec, beta, kappa, std_errors(info), diag)
