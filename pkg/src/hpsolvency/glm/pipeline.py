"""Fitting all three sub-models from a portfolio and its claim history."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..domain import Episode, Portfolio, ValidationError, require_valid
from .design import ModelSpec, Term, build_design_matrix, default_terms
from .gamma import fit_severity_model
from .model import ThreePartModel
from .multinomial import fit_type_model_counts
from .negbin import fit_count_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitSpecs:
    count: ModelSpec
    type: ModelSpec
    severity: ModelSpec
    pooled_severity: bool = False

    @classmethod
    def default(cls, terms=None) -> "FitSpecs":
        terms = default_terms() if terms is None else tuple(terms)
        return cls(ModelSpec(terms, "neg_binomial"), ModelSpec(terms, "multinomial"), ModelSpec(terms, "gamma"))

    def to_dict(self) -> dict:
        return {
            "count": self.count.to_dict(),
            "type": self.type.to_dict(),
            "severity": self.severity.to_dict(),
            "pooled_severity": self.pooled_severity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitSpecs":
        base = cls.default([Term.from_dict(t) for t in d["terms"]] if "terms" in d else None)
        return cls(
            ModelSpec.from_dict({**d["count"], "family": "neg_binomial"}) if "count" in d else base.count,
            ModelSpec.from_dict({**d["type"], "family": "multinomial"}) if "type" in d else base.type,
            ModelSpec.from_dict({**d["severity"], "family": "gamma"}) if "severity" in d else base.severity,
            bool(d.get("pooled_severity", False)),
        )


@dataclass(frozen=True)
class FitOutcome:
    model: ThreePartModel
    n_members: int
    n_episodes: int
    n_zero_excluded: int


def fit_three_part_model(
    portfolio: Portfolio,
    episodes: Sequence[Episode],
    specs: Optional[FitSpecs] = None,
    exposure: Optional[np.ndarray] = None,
) -> FitOutcome:
    """Count model on every member, type model on members with claims, severity model on positive episodes."""
    require_valid(portfolio)
    specs = specs or FitSpecs.default()
    index = portfolio.member_index()
    J = portfolio.J
    unknown = sorted({e.member_id for e in episodes if e.member_id not in index})
    if unknown:
        raise ValidationError(f"episodes reference unknown member_id: {', '.join(unknown[:20])}")
    bad = sorted({e.branch_id for e in episodes if not 1 <= e.branch_id <= J})
    if bad:
        raise ValidationError(f"episodes reference branch ids outside 1..{J}: {bad}")

    records = [m.covariates for m in portfolio.members]
    mem = np.array([index[e.member_id] for e in episodes], dtype=np.int64)
    br = np.array([e.branch_id for e in episodes], dtype=np.int64)
    y = np.array([e.expenditure for e in episodes], dtype=float)

    per_branch = np.zeros((portfolio.r, J))
    np.add.at(per_branch, (mem, br - 1), 1.0)
    counts = per_branch.sum(axis=1)

    count = fit_count_model(build_design_matrix(records, specs.count), counts, exposure, specs.count)

    claimants = np.flatnonzero(counts > 0)
    Xt = build_design_matrix([records[i] for i in claimants], specs.type)
    type_model = fit_type_model_counts(Xt, per_branch[claimants], list(range(1, J + 1)), specs.type)

    positive = y > 0
    n_zero = int(np.sum(~positive))
    if n_zero:
        logger.info("severity fit: excluded %d zero-expenditure episodes", n_zero)
    Xs_members = build_design_matrix(records, specs.severity)
    severity = fit_severity_model(
        Xs_members[mem[positive]], br[positive], y[positive], list(range(1, J + 1)), specs.severity, specs.pooled_severity
    )
    model = ThreePartModel(count, type_model, severity)
    return FitOutcome(model, portfolio.r, len(episodes), n_zero)
