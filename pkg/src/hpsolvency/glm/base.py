from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ITER = 100
REL_LOGLIK_TOL = 1e-10
GRAD_TOL = 1e-6
MAX_HALVINGS = 30


class ConvergenceError(RuntimeError):
    """The solver hit its iteration limit or a singular system."""


@dataclass(frozen=True)
class FitDiagnostics:
    loglik: float
    iterations: int
    converged: bool
    grad_norm: float

    def to_dict(self) -> dict:
        return {
            "loglik": self.loglik,
            "iterations": self.iterations,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitDiagnostics":
        return cls(float(d["loglik"]), int(d["iterations"]), bool(d["converged"]), float(d.get("grad_norm", 0.0)))


def converged(ll_old: float, ll_new: float, grad: np.ndarray, n: int) -> bool:
    """Both the relative likelihood change and the per-observation score must be small.

    The score is divided by ``n`` so the threshold does not scale with sample size.
    """
    rel = abs(ll_new - ll_old) / max(abs(ll_new), 1.0)
    return rel < REL_LOGLIK_TOL and np.max(np.abs(grad)) / n < GRAD_TOL


def solve_spd(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        raise ConvergenceError("singular weighted normal equations (separation or collinear design)") from None


def std_errors(information: np.ndarray) -> np.ndarray:
    try:
        cov = np.linalg.inv(information)
    except np.linalg.LinAlgError:
        return np.full(information.shape[0], np.nan)
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))
