"""Reimbursement rules: per episode, per member-branch, capped per family-branch, plan total.

Money totals are correctly rounded sums (``math.fsum``), so every aggregate
is independent of the order its terms arrive in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .domain import BranchRules, Episode, PlanDesign, Portfolio, ValidationError, family_layout


def episode_reimbursement(y: float, rules: BranchRules) -> float:
    """Plan payment for one episode: ``max(0, min(y - max(s*y, f), M))``.

    The floor at zero covers expenses below the deductible.
    """
    if not y >= 0:
        raise ValidationError(f"episode expenditure must be >= 0, got {y}")
    return max(0.0, min(y - max(rules.coinsurance * y, rules.deductible), rules.episode_cap))


def episode_reimbursements(y: np.ndarray, deductible, coinsurance, episode_cap) -> np.ndarray:
    """Vectorized :func:`episode_reimbursement`; rule arguments broadcast against ``y``."""
    y = np.asarray(y, dtype=float)
    if np.any(~(y >= 0)):
        raise ValidationError("episode expenditures must be >= 0")
    return np.maximum(0.0, np.minimum(y - np.maximum(coinsurance * y, deductible), episode_cap))


def member_branch_reimbursement(episode_ls: Iterable[float]) -> float:
    return math.fsum(episode_ls)


@dataclass(frozen=True)
class FamilyBranchReimbursement:
    family_id: Optional[str]
    branch_id: Optional[int]
    k_hj: float
    capped: bool


def _cap(total: float, family_cap: float) -> Tuple[float, bool]:
    return (family_cap, True) if total > family_cap else (total, False)


def family_branch_reimbursement(
    member_ks: Sequence[float],
    family_oop_max: Optional[float],
    family_id: Optional[str] = None,
    branch_id: Optional[int] = None,
) -> FamilyBranchReimbursement:
    """``min(sum of member reimbursements, family cap)``; ``None`` means no cap."""
    if any(not k >= 0 for k in member_ks):
        raise ValidationError("member reimbursements must be >= 0")
    cap = math.inf if family_oop_max is None else float(family_oop_max)
    k, capped = _cap(math.fsum(member_ks), cap)
    return FamilyBranchReimbursement(family_id, branch_id, k, capped)


def total_reimbursement(per_family_branch: Iterable[FamilyBranchReimbursement]) -> float:
    seen = set()
    values = []
    for item in per_family_branch:
        key = (item.family_id, item.branch_id)
        if key in seen:
            raise ValidationError(f"duplicate family-branch entry {key}")
        seen.add(key)
        values.append(item.k_hj)
    return math.fsum(values)


@dataclass(frozen=True)
class CellTotals:
    """Aggregates for every active (family, branch) cell, in (family, branch) order."""

    family: np.ndarray  # family positions
    branch: np.ndarray  # 0-based branch index
    expenditure: np.ndarray  # Z_hj
    reimbursement: np.ndarray  # K_hj after the family cap
    capped: np.ndarray

    @property
    def Z(self) -> float:
        return math.fsum(self.expenditure)

    @property
    def K(self) -> float:
        return math.fsum(self.reimbursement)


def adjudicate_arrays(
    family: np.ndarray,
    branch: np.ndarray,
    y: np.ndarray,
    plan: PlanDesign,
) -> CellTotals:
    """Batch reimbursement for a table of episodes.

    ``family`` holds family positions and ``branch`` 0-based branch indices,
    one entry per episode. Within each cell the capped amount is
    ``min(fsum of the cell's episode payments, M*_j)``, which equals the sum
    over members of their per-branch totals before rounding.
    """
    family = np.asarray(family, dtype=np.int64)
    branch = np.asarray(branch, dtype=np.int64)
    y = np.asarray(y, dtype=float)
    if not family.shape == branch.shape == y.shape:
        raise ValidationError("family, branch and expenditure arrays must have equal length")
    f, s, M, Mstar = plan.arrays()
    if branch.size and (branch.min() < 0 or branch.max() >= plan.n_branches):
        raise ValidationError(f"branch index outside 0..{plan.n_branches - 1}")
    L = episode_reimbursements(y, f[branch], s[branch], M[branch])

    order = np.lexsort((branch, family))
    fam_s, br_s = family[order], branch[order]
    y_s, L_s = y[order].tolist(), L[order].tolist()
    if order.size:
        starts = np.flatnonzero(np.r_[True, (np.diff(fam_s) != 0) | (np.diff(br_s) != 0)])
    else:
        starts = np.empty(0, dtype=np.int64)
    ends = np.r_[starts[1:], order.size].astype(np.int64)
    z_cells, k_cells, capped = [], [], []
    for a, b, j in zip(starts.tolist(), ends.tolist(), br_s[starts].tolist()):
        z_cells.append(math.fsum(y_s[a:b]))
        k, c = _cap(math.fsum(L_s[a:b]), Mstar[j])
        k_cells.append(k)
        capped.append(c)
    return CellTotals(
        fam_s[starts],
        br_s[starts],
        np.asarray(z_cells, dtype=float),
        np.asarray(k_cells, dtype=float),
        np.asarray(capped, dtype=bool),
    )


@dataclass(frozen=True)
class Adjudication:
    cells: Tuple[FamilyBranchReimbursement, ...]
    Z: float
    K: float


def adjudicate(episodes: Sequence[Episode], portfolio: Portfolio, plan: PlanDesign) -> Adjudication:
    """Reimbursements per (family, branch) for a list of episodes."""
    if plan.n_branches != portfolio.J:
        raise ValidationError(f"plan has {plan.n_branches} branches, portfolio has {portfolio.J}")
    layout = family_layout(portfolio)
    index = portfolio.member_index()
    try:
        fam = np.array([layout.family_of[index[e.member_id]] for e in episodes], dtype=np.int64)
    except KeyError as exc:
        raise ValidationError(f"episode references unknown member_id {exc}") from None
    br = np.array([e.branch_id - 1 for e in episodes], dtype=np.int64)
    y = np.array([e.expenditure for e in episodes], dtype=float)
    cells = adjudicate_arrays(fam, br, y, plan)
    out = tuple(
        FamilyBranchReimbursement(portfolio.families[h].family_id, int(j) + 1, float(k), bool(c))
        for h, j, k, c in zip(cells.family, cells.branch, cells.reimbursement, cells.capped)
    )
    return Adjudication(out, cells.Z, cells.K)
