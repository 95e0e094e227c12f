"""Multinomial logit for the branch of an episode."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..domain import ValidationError
from .base import MAX_HALVINGS, MAX_ITER, ConvergenceError, FitDiagnostics, converged, solve_spd, std_errors
from .design import ModelSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TypeModel:
    """Rows of ``coefficients`` belong to ``branch_ids[1:]``; ``branch_ids[0]`` is the reference."""

    spec: ModelSpec
    coefficients: np.ndarray
    branch_ids: tuple
    std_errors: Optional[np.ndarray] = None
    diagnostics: Optional[FitDiagnostics] = None

    def __post_init__(self):
        B = np.asarray(self.coefficients, dtype=float).reshape(len(self.branch_ids) - 1, -1)
        if B.shape[1] != self.spec.width:
            raise ValidationError(f"type model needs {self.spec.width} columns, got {B.shape[1]}")
        object.__setattr__(self, "coefficients", B)
        object.__setattr__(self, "branch_ids", tuple(int(b) for b in self.branch_ids))

    @property
    def n_branches(self) -> int:
        return len(self.branch_ids)

    def probabilities(self, X: np.ndarray) -> np.ndarray:
        eta = np.zeros((X.shape[0], self.n_branches))
        eta[:, 1:] = X @ self.coefficients.T
        return softmax(eta)


def softmax(eta: np.ndarray) -> np.ndarray:
    z = eta - eta.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _loglik(counts, probs) -> float:
    mask = counts > 0
    return float(np.sum(counts[mask] * np.log(probs[mask])))


def fit_multinomial(X: np.ndarray, counts: np.ndarray):
    """Newton's method on a matrix of per-row category counts.

    Returns ``(coefficients, std_errors, diagnostics)`` with the first
    category as reference.
    """
    n, p = X.shape
    J = counts.shape[1]
    m = counts.sum(axis=1)
    freq = counts.sum(axis=0)
    B = np.zeros((J - 1, p))
    B[:, 0] = np.log(freq[1:] / freq[0])

    def evaluate(B):
        eta = np.zeros((n, J))
        eta[:, 1:] = X @ B.T
        P = softmax(eta)
        return P, _loglik(counts, P)

    def gradient(P):
        R = counts[:, 1:] - m[:, None] * P[:, 1:]
        return (R.T @ X).ravel()

    def information(P):
        k = J - 1
        info = np.empty((k * p, k * p))
        mp = m[:, None] * P[:, 1:]
        for a in range(k):
            for b in range(a, k):
                w = mp[:, a] * ((1.0 if a == b else 0.0) - P[:, 1 + b])
                blk = X.T @ (w[:, None] * X)
                info[a * p : (a + 1) * p, b * p : (b + 1) * p] = blk
                info[b * p : (b + 1) * p, a * p : (a + 1) * p] = blk.T
        return info

    P, ll = evaluate(B)
    n_obs = max(float(m.sum()), 1.0)
    for it in range(1, MAX_ITER + 1):
        g = gradient(P)
        step = solve_spd(information(P), g).reshape(J - 1, p)
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = B + t * step
            P_c, ll_c = evaluate(cand)
            if np.isfinite(ll_c) and ll_c >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        else:
            raise ConvergenceError("type model: step-halving failed to increase the likelihood")
        ll_old, B, P, ll = ll, cand, P_c, ll_c
        g = gradient(P)
        if converged(ll_old, ll, g, n_obs):
            info = information(P)
            diag = FitDiagnostics(ll, it, True, float(np.max(np.abs(g)) / n_obs))
            return B, std_errors(info).reshape(J - 1, p), diag
    raise ConvergenceError(f"type model did not converge in {MAX_ITER} iterations")


def fit_type_model(
    design: np.ndarray,
    branch_labels: Sequence[int],
    branch_ids: Optional[Sequence[int]] = None,
    spec: Optional[ModelSpec] = None,
) -> TypeModel:
    """Fit on one row per episode; ``branch_labels[k]`` is the branch of episode ``k``."""
    X = np.asarray(design, dtype=float)
    labels = np.asarray(branch_labels)
    if labels.shape != (X.shape[0],):
        raise ValidationError(f"design has {X.shape[0]} rows but {labels.shape[0]} labels were given")
    if branch_ids is None:
        branch_ids = sorted(set(int(b) for b in labels))
    branch_ids = [int(b) for b in branch_ids]
    pos = {b: k for k, b in enumerate(branch_ids)}
    try:
        codes = np.array([pos[int(b)] for b in labels], dtype=np.int64)
    except KeyError as exc:
        raise ValidationError(f"label {exc} is not among branch ids {branch_ids}") from None
    counts = np.zeros((X.shape[0], len(branch_ids)))
    counts[np.arange(X.shape[0]), codes] = 1.0
    return fit_type_model_counts(X, counts, branch_ids, spec)


def fit_type_model_counts(
    design: np.ndarray,
    counts: np.ndarray,
    branch_ids: Sequence[int],
    spec: Optional[ModelSpec] = None,
) -> TypeModel:
    """Same likelihood as :func:`fit_type_model`, with episodes of identical covariates pooled per row."""
    X = np.asarray(design, dtype=float)
    counts = np.asarray(counts, dtype=float)
    branch_ids = [int(b) for b in branch_ids]
    if counts.shape != (X.shape[0], len(branch_ids)):
        raise ValidationError("counts must have one row per design row and one column per branch")
    if len(branch_ids) < 2:
        raise ValidationError("type model needs at least two branches")
    empty = [b for b, c in zip(branch_ids, counts.sum(axis=0)) if c == 0]
    if empty:
        raise ValidationError(f"branches never observed: {empty}")
    if spec is None:
        if X.shape[1] != 1:
            raise ValidationError("spec is required for designs with covariates")
        spec = ModelSpec(family="multinomial")
    if spec.width != X.shape[1]:
        raise ValidationError(f"design has {X.shape[1]} columns, spec expects {spec.width}")
    keep = counts.sum(axis=1) > 0
    B, se, diag = fit_multinomial(X[keep], counts[keep])
    logger.info("type model: J=%d loglik=%.6f iterations=%d", len(branch_ids), diag.loglik, diag.iterations)
    return TypeModel(spec, B, tuple(branch_ids), se, diag)
