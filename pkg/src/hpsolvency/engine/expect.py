"""Closed-form expected expenditure by member, branch, family and plan."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict

import numpy as np

from ..domain import CovariateRecord, PlanDesign, Portfolio, family_layout, require_valid
from ..glm import ThreePartModel, predict_count_mean, predict_severity_mean, predict_type_probs


@dataclass(frozen=True)
class ExpectedExpenditureReport:
    member_ids: tuple
    family_ids: tuple
    per_member_branch: np.ndarray  # (r, J)
    per_member: np.ndarray  # (r,)
    per_family: np.ndarray  # (H,)
    total: float

    def to_dict(self) -> Dict:
        return {
            "total": self.total,
            "per_family": dict(zip(self.family_ids, self.per_family.tolist())),
            "per_member": dict(zip(self.member_ids, self.per_member.tolist())),
        }


def expected_member_branch(model: ThreePartModel, x: CovariateRecord, branch_id: int) -> float:
    """E[Z_ij] = E[N_i] * P(T_i = j | N_i > 0) * E[Y_ij]."""
    k = model.severity.branch_index(branch_id)
    p = predict_type_probs(model.type, x)[k]
    if p == 0.0:
        return 0.0
    return predict_count_mean(model.count, x) * p * predict_severity_mean(model.severity, x, branch_id)


def expected_totals(model: ThreePartModel, portfolio: Portfolio) -> ExpectedExpenditureReport:
    require_valid(portfolio)
    tables = model.tables([m.covariates for m in portfolio.members])
    per_mb = tables.count_mean[:, None] * tables.type_probs * tables.severity_mean
    per_member = np.array([math.fsum(row) for row in per_mb])
    layout = family_layout(portfolio)
    per_family = np.array(
        [math.fsum(per_member[layout.order[a:b]]) for a, b in zip(layout.offsets[:-1], layout.offsets[1:])]
    )
    return ExpectedExpenditureReport(
        tuple(m.member_id for m in portfolio.members),
        tuple(f.family_id for f in portfolio.families),
        per_mb,
        per_member,
        per_family,
        math.fsum(per_member),
    )


def contributions(plan: PlanDesign, portfolio: Portfolio) -> float:
    """C = b * r."""
    return plan.contribution * portfolio.r
