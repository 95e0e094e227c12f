"""Members, families, branches and plan design."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

Value = Union[float, int, str]


class ValidationError(ValueError):
    """Raised when an input violates a structural rule."""


@dataclass(frozen=True)
class CovariateRecord:
    age: int
    sex: str
    extra: Tuple[Tuple[str, Value], ...] = ()

    def __post_init__(self):
        if isinstance(self.age, bool) or int(self.age) != self.age or self.age < 0:
            raise ValidationError(f"age must be a nonnegative integer, got {self.age!r}")
        if self.sex not in ("M", "F"):
            raise ValidationError(f"sex must be 'M' or 'F', got {self.sex!r}")
        object.__setattr__(self, "extra", tuple((str(k), v) for k, v in self.extra))

    @property
    def extra_names(self) -> Tuple[str, ...]:
        return tuple(k for k, _ in self.extra)

    def get(self, name: str) -> Value:
        if name == "age":
            return self.age
        if name == "sex":
            return self.sex
        for k, v in self.extra:
            if k == name:
                return v
        raise KeyError(name)


@dataclass(frozen=True)
class Member:
    member_id: str
    family_id: str
    covariates: CovariateRecord


@dataclass(frozen=True)
class Family:
    family_id: str
    member_ids: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "member_ids", tuple(self.member_ids))
        if not self.member_ids:
            raise ValidationError(f"family {self.family_id} has no members")


@dataclass(frozen=True)
class Branch:
    branch_id: int
    name: str = ""


@dataclass(frozen=True)
class BranchRules:
    """Benefit parameters of one branch.

    ``episode_oop_max`` and ``family_oop_max`` are ``None`` when unbounded.
    Both cap the plan's payment (per episode and per family-year).
    """

    deductible: float = 0.0
    coinsurance: float = 0.0
    episode_oop_max: Optional[float] = None
    family_oop_max: Optional[float] = None

    def __post_init__(self):
        f, s = self.deductible, self.coinsurance
        if not (math.isfinite(f) and f >= 0):
            raise ValidationError(f"deductible must be finite and >= 0, got {f}")
        if not (0.0 <= s <= 1.0):
            raise ValidationError(f"coinsurance must lie in [0, 1], got {s}")
        for name in ("episode_oop_max", "family_oop_max"):
            cap = getattr(self, name)
            if cap is not None and not (math.isfinite(cap) and cap > 0):
                raise ValidationError(f"{name} must be > 0 or unbounded, got {cap}")

    @property
    def episode_cap(self) -> float:
        """Episode cap as a float; unbounded maps to +inf, which min() absorbs exactly."""
        return math.inf if self.episode_oop_max is None else float(self.episode_oop_max)

    @property
    def family_cap(self) -> float:
        return math.inf if self.family_oop_max is None else float(self.family_oop_max)


@dataclass(frozen=True)
class PlanDesign:
    rules: Mapping[int, BranchRules]
    contribution: float
    branch_names: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.contribution) and self.contribution >= 0):
            raise ValidationError("contribution must be finite and >= 0")
        ids = sorted(self.rules)
        if ids != list(range(1, len(ids) + 1)):
            raise ValidationError(f"branch rules must cover ids 1..J contiguously, got {ids}")
        object.__setattr__(self, "rules", dict(sorted(self.rules.items())))

    @property
    def n_branches(self) -> int:
        return len(self.rules)

    def arrays(self):
        """Per-branch ``(deductible, coinsurance, episode_cap, family_cap)`` arrays, index j-1."""
        rules = [self.rules[j] for j in range(1, self.n_branches + 1)]
        return (
            np.array([r.deductible for r in rules], dtype=float),
            np.array([r.coinsurance for r in rules], dtype=float),
            np.array([r.episode_cap for r in rules], dtype=float),
            np.array([r.family_cap for r in rules], dtype=float),
        )

    @classmethod
    def unlimited(cls, n_branches: int, contribution: float = 0.0) -> "PlanDesign":
        """Plan with no deductible, coinsurance or caps: it reimburses every expense in full."""
        return cls({j: BranchRules() for j in range(1, n_branches + 1)}, contribution)


@dataclass(frozen=True)
class Episode:
    member_id: str
    branch_id: int
    expenditure: float

    def __post_init__(self):
        if not self.expenditure >= 0:
            raise ValidationError(f"episode expenditure must be >= 0, got {self.expenditure}")


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...]

    @property
    def valid(self) -> bool:
        return not self.violations

    def kinds(self) -> List[str]:
        return [v.kind for v in self.violations]

    def __str__(self):
        if self.valid:
            return "valid"
        return "; ".join(f"{v.kind}: {v.detail}" for v in self.violations)


@dataclass(frozen=True)
class Portfolio:
    """The insured population for one plan year.

    ``extra_schema`` fixes the names and order of the extra covariates every
    member must carry.
    """

    members: Tuple[Member, ...]
    families: Tuple[Family, ...]
    branches: Tuple[Branch, ...]
    extra_schema: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "extra_schema", tuple(self.extra_schema))

    @property
    def r(self) -> int:
        return len(self.members)

    @property
    def H(self) -> int:
        return len(self.families)

    @property
    def J(self) -> int:
        return len(self.branches)

    def member_index(self) -> Dict[str, int]:
        return {m.member_id: i for i, m in enumerate(self.members)}

    @classmethod
    def from_members(
        cls,
        members: Sequence[Member],
        branches: Union[int, Sequence[Branch]],
        extra_schema: Optional[Sequence[str]] = None,
    ) -> "Portfolio":
        """Build a portfolio, deriving families from the members' ``family_id``.

        Families are ordered by first appearance in ``members``.
        """
        members = tuple(members)
        if isinstance(branches, int):
            branches = tuple(Branch(j, f"branch_{j}") for j in range(1, branches + 1))
        groups: Dict[str, List[str]] = {}
        for m in members:
            groups.setdefault(m.family_id, []).append(m.member_id)
        families = tuple(Family(fid, tuple(ids)) for fid, ids in groups.items())
        if extra_schema is None:
            extra_schema = members[0].covariates.extra_names if members else ()
        return cls(members, families, tuple(branches), tuple(extra_schema))


def validate_portfolio(p: Portfolio) -> ValidationReport:
    """Collect every structural problem in ``p``; never raises."""
    out: List[Violation] = []
    if not p.members:
        out.append(Violation("empty portfolio", "portfolio has no members"))
    if not p.families:
        out.append(Violation("empty portfolio", "portfolio has no families"))

    seen = set()
    for m in p.members:
        if m.member_id in seen:
            out.append(Violation("duplicate member id", m.member_id))
        seen.add(m.member_id)

    family_ids = [f.family_id for f in p.families]
    if len(set(family_ids)) != len(family_ids):
        dups = sorted({f for f in family_ids if family_ids.count(f) > 1})
        out.append(Violation("duplicate family id", ", ".join(dups)))
    known = set(family_ids)
    for m in p.members:
        if m.family_id not in known:
            out.append(Violation("orphan family reference", f"member {m.member_id} -> family {m.family_id}"))

    # partition: every member listed in exactly its own family, once
    listed: Dict[str, List[str]] = {}
    for f in p.families:
        for mid in f.member_ids:
            listed.setdefault(mid, []).append(f.family_id)
    by_id = {m.member_id: m for m in p.members}
    for mid, fams in listed.items():
        if mid not in by_id:
            out.append(Violation("unknown family member", f"family {fams[0]} lists {mid}"))
        elif len(fams) > 1:
            out.append(Violation("member in several families", f"{mid} in {', '.join(fams)}"))
        elif by_id[mid].family_id != fams[0]:
            out.append(
                Violation("family mismatch", f"{mid} declares {by_id[mid].family_id}, listed in {fams[0]}")
            )
    for m in p.members:
        if m.family_id in known and m.member_id not in listed:
            out.append(Violation("member not in family list", f"{m.member_id} missing from {m.family_id}"))

    for m in p.members:
        if m.covariates.extra_names != p.extra_schema:
            out.append(
                Violation(
                    "covariate schema mismatch",
                    f"member {m.member_id} has {list(m.covariates.extra_names)}, expected {list(p.extra_schema)}",
                )
            )

    ids = [b.branch_id for b in p.branches]
    if ids != list(range(1, len(ids) + 1)):
        out.append(Violation("branch ids", f"branch ids must be 1..J in order, got {ids}"))
    return ValidationReport(tuple(out))


def require_valid(p: Portfolio) -> None:
    report = validate_portfolio(p)
    if not report.valid:
        raise ValidationError(f"invalid portfolio: {report}")


def group_by_family(p: Portfolio) -> Dict[str, List[int]]:
    """Map each family id to the positions of its members in ``p.members``."""
    require_valid(p)
    pos = p.member_index()
    return {f.family_id: [pos[mid] for mid in f.member_ids] for f in p.families}


@dataclass(frozen=True)
class FamilyLayout:
    """Members ordered family by family, in CSR form, for the numeric kernels."""

    order: np.ndarray  # member positions, grouped by family
    offsets: np.ndarray  # family h owns order[offsets[h]:offsets[h + 1]]
    family_of: np.ndarray  # family position of each member


def family_layout(p: Portfolio) -> FamilyLayout:
    groups = group_by_family(p)
    order, offsets = [], [0]
    family_of = np.empty(p.r, dtype=np.int64)
    for h, f in enumerate(p.families):
        members = groups[f.family_id]
        order.extend(members)
        offsets.append(len(order))
        family_of[members] = h
    return FamilyLayout(np.asarray(order, dtype=np.int64), np.asarray(offsets, dtype=np.int64), family_of)
