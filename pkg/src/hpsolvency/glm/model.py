from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..domain import CovariateRecord, ValidationError
from ..rng import Stream
from .base import FitDiagnostics
from .design import ModelSpec, build_design_matrix
from .gamma import SeverityModel
from .multinomial import TypeModel
from .negbin import CountModel

FORMAT_VERSION = 1


@dataclass(frozen=True)
class MemberTables:
    """Per-member model quantities the simulation kernels consume."""

    count_mean: np.ndarray  # (r,)
    dispersion: float
    type_probs: np.ndarray  # (r, J)
    severity_mean: np.ndarray  # (r, J)
    severity_shape: np.ndarray  # (J,)


@dataclass(frozen=True)
class ThreePartModel:
    count: CountModel
    type: TypeModel
    severity: SeverityModel

    def __post_init__(self):
        if self.type.branch_ids != self.severity.branch_ids:
            raise ValidationError(
                f"type and severity models disagree on branches: {self.type.branch_ids} vs {self.severity.branch_ids}"
            )
        if list(self.type.branch_ids) != list(range(1, len(self.type.branch_ids) + 1)):
            raise ValidationError("branch ids must be 1..J in order")

    @property
    def J(self) -> int:
        return self.type.n_branches

    @property
    def branch_ids(self):
        return self.type.branch_ids

    def tables(self, records: Sequence[CovariateRecord]) -> MemberTables:
        return MemberTables(
            self.count.mean(build_design_matrix(records, self.count.spec)),
            self.count.dispersion,
            self.type.probabilities(build_design_matrix(records, self.type.spec)),
            self.severity.means(build_design_matrix(records, self.severity.spec)),
            self.severity.shapes.copy(),
        )

    def to_dict(self) -> dict:
        c, t, s = self.count, self.type, self.severity
        return {
            "format_version": FORMAT_VERSION,
            "n_branches": self.J,
            "count": {
                "spec": c.spec.to_dict(),
                "coefficients": c.coefficients.tolist(),
                "dispersion": c.dispersion,
                "std_errors": _list_or_none(c.std_errors),
                "diagnostics": _diag(c.diagnostics),
            },
            "type": {
                "spec": t.spec.to_dict(),
                "branch_ids": list(t.branch_ids),
                "reference_branch": t.branch_ids[0],
                "coefficients": t.coefficients.tolist(),
                "std_errors": _list_or_none(t.std_errors),
                "diagnostics": _diag(t.diagnostics),
            },
            "severity": {
                "spec": s.spec.to_dict(),
                "branch_ids": list(s.branch_ids),
                "pooled": s.pooled,
                "coefficients": s.coefficients.tolist(),
                "shapes": s.shapes.tolist(),
                "std_errors": _list_or_none(s.std_errors),
                "diagnostics": [d.to_dict() for d in s.diagnostics],
                "warnings": list(s.warnings),
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ThreePartModel":
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise ValidationError(f"unsupported model format_version {version!r}")
        try:
            c, t, s = doc["count"], doc["type"], doc["severity"]
            count = CountModel(
                ModelSpec.from_dict(c["spec"]),
                np.asarray(c["coefficients"], dtype=float),
                float(c["dispersion"]),
                _array_or_none(c.get("std_errors")),
                _undiag(c.get("diagnostics")),
            )
            tm = TypeModel(
                ModelSpec.from_dict(t["spec"]),
                np.asarray(t["coefficients"], dtype=float),
                tuple(t["branch_ids"]),
                _array_or_none(t.get("std_errors")),
                _undiag(t.get("diagnostics")),
            )
            sm = SeverityModel(
                ModelSpec.from_dict(s["spec"]),
                np.asarray(s["coefficients"], dtype=float),
                np.asarray(s["shapes"], dtype=float),
                tuple(s["branch_ids"]),
                bool(s.get("pooled", False)),
                _array_or_none(s.get("std_errors")),
                tuple(FitDiagnostics.from_dict(d) for d in s.get("diagnostics", [])),
                tuple(s.get("warnings", [])),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed model file: {exc}") from None
        return cls(count, tm, sm)


def _nan_to_none(v):
    if isinstance(v, list):
        return [_nan_to_none(e) for e in v]
    return None if not np.isfinite(v) else v


def _list_or_none(a):
    return None if a is None else _nan_to_none(np.asarray(a, dtype=float).tolist())


def _array_or_none(v):
    # numpy maps None to nan under dtype=float
    return None if v is None else np.array(v, dtype=float)


def _diag(d: Optional[FitDiagnostics]):
    return None if d is None else d.to_dict()


def _undiag(d):
    return None if d is None else FitDiagnostics.from_dict(d)


def fit_report(model: ThreePartModel) -> dict:
    """Coefficients with standard errors and convergence status for each sub-model."""

    def table(names, coef, se):
        se = np.full_like(coef, np.nan) if se is None else se
        return [
            {"term": n, "estimate": float(b), "std_error": None if not np.isfinite(e) else float(e)}
            for n, b, e in zip(names, coef, se)
        ]

    c, t, s = model.count, model.type, model.severity
    return {
        "count": {
            "family": "neg_binomial",
            "link": c.spec.link,
            "dispersion": c.dispersion,
            "coefficients": table(c.spec.column_names, c.coefficients, c.std_errors),
            "diagnostics": _diag(c.diagnostics),
        },
        "type": {
            "family": "multinomial",
            "link": t.spec.link,
            "reference_branch": t.branch_ids[0],
            "branches": {
                str(b): table(t.spec.column_names, t.coefficients[k], None if t.std_errors is None else t.std_errors[k])
                for k, b in enumerate(t.branch_ids[1:])
            },
            "diagnostics": _diag(t.diagnostics),
        },
        "severity": {
            "family": "gamma",
            "link": s.spec.link,
            "pooled": s.pooled,
            "branches": {
                str(b): {
                    "shape": float(s.shapes[k]),
                    "coefficients": table(
                        s.spec.column_names, s.coefficients[k], None if s.std_errors is None else s.std_errors[k]
                    ),
                }
                for k, b in enumerate(s.branch_ids)
            },
            "diagnostics": [d.to_dict() for d in s.diagnostics],
            "warnings": list(s.warnings),
        },
    }


# -- scoring -----------------------------------------------------------------


def _row(x: CovariateRecord, spec: ModelSpec) -> np.ndarray:
    return build_design_matrix([x], spec)


def predict_count_mean(m: CountModel, x: CovariateRecord) -> float:
    return float(m.mean(_row(x, m.spec))[0])


def predict_type_probs(m: TypeModel, x: CovariateRecord) -> np.ndarray:
    return m.probabilities(_row(x, m.spec))[0]


def predict_severity_mean(m: SeverityModel, x: CovariateRecord, branch_id: int) -> float:
    k = m.branch_index(branch_id)
    return float(m.means(_row(x, m.spec))[0, k])


# -- sampling ----------------------------------------------------------------


def sample_count(m: CountModel, x: CovariateRecord, stream: Stream, size: Optional[int] = None):
    return stream.negbin(predict_count_mean(m, x), m.dispersion, size)


def sample_type(m: TypeModel, x: CovariateRecord, stream: Stream, size: Optional[int] = None):
    """Branch id(s) drawn from the predicted probabilities."""
    draws = stream.categorical(predict_type_probs(m, x), size)
    ids = np.asarray(m.branch_ids)
    return int(ids[draws]) if size is None else ids[draws]


def sample_severity(m: SeverityModel, x: CovariateRecord, branch_id: int, stream: Stream, size: Optional[int] = None):
    shape = float(m.shapes[m.branch_index(branch_id)])
    return stream.gamma(shape, predict_severity_mean(m, x, branch_id) / shape, size)
