"""Gamma severity regression with a log link, one model per branch by default."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from ..domain import ValidationError
from .base import MAX_HALVINGS, MAX_ITER, ConvergenceError, FitDiagnostics, converged, solve_spd, std_errors
from .design import ModelSpec

logger = logging.getLogger(__name__)

SHAPE_FLOOR = 1e-3
SHAPE_CEILING = 1e6


@dataclass(frozen=True)
class SeverityModel:
    """Per-branch Gamma means ``exp(x . coefficients[j])`` and shapes ``shapes[j]``.

    Pooled fits are stored in the same per-branch form: the shared slopes are
    repeated on every row and the branch effect folded into the intercept.
    """

    spec: ModelSpec
    coefficients: np.ndarray
    shapes: np.ndarray
    branch_ids: tuple
    pooled: bool = False
    std_errors: Optional[np.ndarray] = None
    diagnostics: Tuple[FitDiagnostics, ...] = ()
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        B = np.asarray(self.coefficients, dtype=float)
        a = np.asarray(self.shapes, dtype=float)
        J = len(self.branch_ids)
        if B.shape != (J, self.spec.width):
            raise ValidationError(f"severity coefficients must be {J} x {self.spec.width}, got {B.shape}")
        if a.shape != (J,) or not np.all(a > 0):
            raise ValidationError("severity shapes must be one positive value per branch")
        object.__setattr__(self, "coefficients", B)
        object.__setattr__(self, "shapes", a)
        object.__setattr__(self, "branch_ids", tuple(int(b) for b in self.branch_ids))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))

    def branch_index(self, branch_id: int) -> int:
        try:
            return self.branch_ids.index(int(branch_id))
        except ValueError:
            raise ValidationError(f"unknown branch {branch_id}") from None

    def means(self, X: np.ndarray) -> np.ndarray:
        """Matrix of predicted means, one column per branch."""
        return np.exp(X @ self.coefficients.T)


def gamma_loglik(y, mu, shape) -> float:
    return float(np.sum(shape * np.log(shape * y / mu) - shape * y / mu - np.log(y) - gammaln(shape)))


def _deviance(y, mu) -> float:
    return float(2.0 * np.sum(-np.log(y / mu) + (y - mu) / mu))


def fit_gamma_glm(X: np.ndarray, y: np.ndarray):
    """IRLS for a log-link Gamma GLM. The working weights are constant, so each step is least squares.

    Returns ``(beta, mu, diagnostics)``; the log-likelihood in the
    diagnostics is at shape 1 (the shape does not affect ``beta``).
    """
    n, p = X.shape
    beta = np.zeros(p)
    beta[0] = np.log(y.mean())
    mu = np.exp(X @ beta)
    ll = -0.5 * _deviance(y, mu)
    for it in range(1, MAX_ITER + 1):
        grad = X.T @ ((y - mu) / mu)
        step = solve_spd(X.T @ X, grad)
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = beta + t * step
            eta = X @ cand
            if np.all(np.isfinite(eta)) and eta.max() < 700:
                mu_c = np.exp(eta)
                ll_c = -0.5 * _deviance(y, mu_c)
                if ll_c >= ll - 1e-12 * abs(ll):
                    break
            t *= 0.5
        else:
            raise ConvergenceError("severity model: step-halving failed to reduce the deviance")
        ll_old, beta, mu, ll = ll, cand, mu_c, ll_c
        grad = X.T @ ((y - mu) / mu)
        if converged(ll_old, ll, grad, n):
            return beta, mu, FitDiagnostics(gamma_loglik(y, mu, 1.0), it, True, float(np.max(np.abs(grad)) / n))
    raise ConvergenceError(f"severity model did not converge in {MAX_ITER} iterations")


def pearson_shape(y, mu, n_params: int) -> Tuple[float, Optional[str]]:
    """Shape = 1 / Pearson dispersion, clipped to [SHAPE_FLOOR, SHAPE_CEILING]."""
    dof = y.shape[0] - n_params
    if dof <= 0:
        return 1.0, f"only {y.shape[0]} observation(s) for {n_params} parameter(s); shape set to 1"
    phi = float(np.sum(((y - mu) / mu) ** 2)) / dof
    if phi <= 0:
        return SHAPE_CEILING, None
    return float(np.clip(1.0 / phi, SHAPE_FLOOR, SHAPE_CEILING)), None


def fit_severity_model(
    design: np.ndarray,
    branch_labels: Sequence[int],
    expenditures,
    branch_ids: Optional[Sequence[int]] = None,
    spec: Optional[ModelSpec] = None,
    pooled: bool = False,
) -> SeverityModel:
    """One row per episode. Branches with fewer episodes than coefficients fall back to intercept-only."""
    X = np.asarray(design, dtype=float)
    y = np.asarray(expenditures, dtype=float)
    labels = np.asarray(branch_labels, dtype=np.int64)
    n, p = X.shape
    if y.shape != (n,) or labels.shape != (n,):
        raise ValidationError("design, branch labels and expenditures must have the same length")
    if np.any(~(y > 0)):
        raise ValidationError("nonpositive severity: Gamma responses must be > 0")
    if spec is None:
        if p != 1:
            raise ValidationError("spec is required for designs with covariates")
        spec = ModelSpec(family="gamma")
    if spec.width != p:
        raise ValidationError(f"design has {p} columns, spec expects {spec.width}")
    if branch_ids is None:
        branch_ids = sorted(set(labels.tolist()))
    branch_ids = [int(b) for b in branch_ids]
    unknown = sorted(set(labels.tolist()) - set(branch_ids))
    if unknown:
        raise ValidationError(f"labels {unknown} are not among branch ids {branch_ids}")
    empty = [b for b in branch_ids if not np.any(labels == b)]
    if empty:
        raise ValidationError(f"no severity observations for branches {empty}")

    J = len(branch_ids)
    coefs = np.zeros((J, p))
    shapes = np.empty(J)
    ses = np.full((J, p), np.nan)
    diags: List[FitDiagnostics] = []
    warnings: List[str] = []

    if pooled:
        # shared slopes + one intercept shift per non-reference branch
        D = np.zeros((n, J - 1))
        for k, b in enumerate(branch_ids[1:]):
            D[labels == b, k] = 1.0
        Xp = np.hstack([X, D])
        beta, mu, diag = fit_gamma_glm(Xp, y)
        phi = float(np.sum(((y - mu) / mu) ** 2)) / max(n - Xp.shape[1], 1)
        se = std_errors(Xp.T @ Xp) * np.sqrt(phi)
        for k, b in enumerate(branch_ids):
            coefs[k] = beta[:p]
            if k > 0:
                coefs[k, 0] += beta[p + k - 1]
            ses[k] = se[:p]
            mask = labels == b
            shapes[k], warn = pearson_shape(y[mask], mu[mask], 1)
            if warn:
                warnings.append(f"branch {b}: {warn}")
        diags.append(diag)
    else:
        for k, b in enumerate(branch_ids):
            mask = labels == b
            Xb, yb = X[mask], y[mask]
            if yb.shape[0] < p:
                warnings.append(f"branch {b}: {yb.shape[0]} observations < {p} coefficients; intercept-only fallback")
                logger.warning(warnings[-1])
                Xb = Xb[:, :1]
            try:
                beta, mu, diag = fit_gamma_glm(Xb, yb)
            except ConvergenceError as exc:
                if Xb.shape[1] == 1:
                    raise
                warnings.append(f"branch {b}: {exc}; intercept-only fallback")
                logger.warning(warnings[-1])
                Xb = Xb[:, :1]
                beta, mu, diag = fit_gamma_glm(Xb, yb)
            coefs[k, : beta.shape[0]] = beta
            ses[k, : beta.shape[0]] = std_errors(Xb.T @ Xb)
            shapes[k], warn = pearson_shape(yb, mu, beta.shape[0])
            if warn:
                warnings.append(f"branch {b}: {warn}")
            ses[k] /= np.sqrt(shapes[k])
            diags.append(diag)
    return SeverityModel(spec, coefs, shapes, tuple(branch_ids), pooled, ses, tuple(diags), tuple(warnings))
