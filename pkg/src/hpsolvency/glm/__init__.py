"""Three-part GLM: NegBin episode counts, multinomial branch choice, Gamma severities."""

from .base import ConvergenceError, FitDiagnostics
from .design import ModelSpec, Term, build_design_matrix, default_terms
from .gamma import SeverityModel, fit_severity_model
from .model import (
    FORMAT_VERSION,
    MemberTables,
    ThreePartModel,
    fit_report,
    predict_count_mean,
    predict_severity_mean,
    predict_type_probs,
    sample_count,
    sample_severity,
    sample_type,
)
from .multinomial import TypeModel, fit_type_model, fit_type_model_counts
from .negbin import CountModel, fit_count_model
from .pipeline import FitOutcome, FitSpecs, fit_three_part_model

__all__ = [
    "ConvergenceError",
    "CountModel",
    "FORMAT_VERSION",
    "FitDiagnostics",
    "FitOutcome",
    "FitSpecs",
    "MemberTables",
    "ModelSpec",
    "SeverityModel",
    "Term",
    "ThreePartModel",
    "TypeModel",
    "build_design_matrix",
    "default_terms",
    "fit_count_model",
    "fit_report",
    "fit_severity_model",
    "fit_three_part_model",
    "fit_type_model",
    "fit_type_model_counts",
    "predict_count_mean",
    "predict_severity_mean",
    "predict_type_probs",
    "sample_count",
    "sample_severity",
    "sample_type",
]
