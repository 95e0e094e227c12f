"""Synthetic portfolios and claim histories drawn from a known three-part model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from ..domain import Branch, CovariateRecord, Episode, Member, Portfolio, ValidationError
from ..glm import CountModel, ModelSpec, SeverityModel, Term, ThreePartModel, TypeModel
from ..rng import DOMAIN_HISTORY, negbin_table, split_seed
from . import kernels


def default_generator_terms() -> Tuple[Term, ...]:
    return (Term("age", center=50.0, scale=10.0), Term("sex", "categorical", ("F", "M")))


@dataclass(frozen=True)
class GeneratorSpec:
    """Population size and true model parameters.

    Coefficient arrays follow ``terms`` (intercept first). Left as ``None``,
    the type and severity coefficients get smooth deterministic defaults for
    any J.
    """

    r: int
    H: int
    J: int
    age_min: int = 18
    age_max: int = 85
    p_male: float = 0.5
    terms: Tuple[Term, ...] = field(default_factory=default_generator_terms)
    count_coefficients: Optional[Sequence[float]] = None
    dispersion: float = 1.5
    type_coefficients: Optional[Sequence[Sequence[float]]] = None
    severity_coefficients: Optional[Sequence[Sequence[float]]] = None
    severity_shapes: Optional[Sequence[float]] = None
    branch_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        if self.r < 1 or self.H < 1 or self.J < 2:
            raise ValidationError("generator needs r >= 1, H >= 1, J >= 2")
        if self.H > self.r:
            raise ValidationError(f"H exceeds r ({self.H} > {self.r})")
        if not 0 <= self.age_min <= self.age_max:
            raise ValidationError("need 0 <= age_min <= age_max")
        if not 0.0 <= self.p_male <= 1.0:
            raise ValidationError("p_male must lie in [0, 1]")
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def width(self) -> int:
        return ModelSpec(self.terms).width

    def true_model(self) -> ThreePartModel:
        p, J = self.width, self.J
        count = np.zeros(p) if self.count_coefficients is None else np.asarray(self.count_coefficients, float)
        if self.count_coefficients is None:
            count[0] = 0.0
            count[1:] = 0.1
        if self.type_coefficients is None:
            ks = np.arange(1, J)
            tc = np.zeros((J - 1, p))
            tc[:, 0] = -0.5 * ks / J
            if p > 1:
                tc[:, 1:] = 0.1 * np.where(ks % 2 == 0, 1.0, -1.0)[:, None]
        else:
            tc = np.asarray(self.type_coefficients, float)
        if self.severity_coefficients is None:
            sc = np.zeros((J, p))
            sc[:, 0] = np.log(100.0 + 25.0 * np.arange(J))
        else:
            sc = np.asarray(self.severity_coefficients, float)
        shapes = np.full(J, 1.5) if self.severity_shapes is None else np.asarray(self.severity_shapes, float)
        ids = tuple(range(1, J + 1))
        return ThreePartModel(
            CountModel(ModelSpec(self.terms, "neg_binomial"), count, float(self.dispersion)),
            TypeModel(ModelSpec(self.terms, "multinomial"), tc, ids),
            SeverityModel(ModelSpec(self.terms, "gamma"), sc, shapes, ids),
        )

    def to_dict(self) -> dict:
        m = self.true_model()
        return {
            "r": self.r,
            "H": self.H,
            "J": self.J,
            "age_min": self.age_min,
            "age_max": self.age_max,
            "p_male": self.p_male,
            "terms": [t.to_dict() for t in self.terms],
            "count_coefficients": m.count.coefficients.tolist(),
            "dispersion": m.count.dispersion,
            "type_coefficients": m.type.coefficients.tolist(),
            "severity_coefficients": m.severity.coefficients.tolist(),
            "severity_shapes": m.severity.shapes.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        known = {
            "r", "H", "J", "age_min", "age_max", "p_male", "count_coefficients", "dispersion",
            "type_coefficients", "severity_coefficients", "severity_shapes", "branch_names",
        }  # fmt: skip
        unknown = set(d) - known - {"terms"}
        if unknown:
            raise ValidationError(f"unknown generator fields: {sorted(unknown)}")
        kwargs = {k: d[k] for k in known if k in d}
        if "terms" in d:
            kwargs["terms"] = tuple(Term.from_dict(t) for t in d["terms"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ValidationError(str(exc)) from None


@dataclass(frozen=True)
class SyntheticData:
    portfolio: Portfolio
    episodes: Tuple[Episode, ...]
    truth: ThreePartModel
    spec: GeneratorSpec


def generate_synthetic_portfolio(spec: GeneratorSpec, seed: int) -> SyntheticData:
    """Members, families and one year of claims drawn from ``spec.true_model()``.

    Covariates and family membership come from numpy's PCG64 seeded with
    ``seed``; the claims from the counter-based history streams.
    """
    split_seed(seed)
    rng = np.random.default_rng(seed)
    r, H = spec.r, spec.H
    ages = rng.integers(spec.age_min, spec.age_max + 1, size=r)
    sexes = np.where(rng.random(r) < spec.p_male, "M", "F")
    # first H members open one family each; the rest join uniformly at random
    fam = np.concatenate([np.arange(H), rng.integers(0, H, size=r - H)])
    wm, wf = len(str(r)), len(str(H))
    members = [
        Member(f"m{i + 1:0{wm}d}", f"f{fam[i] + 1:0{wf}d}", CovariateRecord(int(ages[i]), str(sexes[i])))
        for i in range(r)
    ]
    names = spec.branch_names or [f"branch_{j}" for j in range(1, spec.J + 1)]
    if len(names) != spec.J:
        raise ValidationError("branch_names must have J entries")
    portfolio = Portfolio.from_members(members, tuple(Branch(j + 1, names[j]) for j in range(spec.J)))
    truth = spec.true_model()

    t = truth.tables([m.covariates for m in members])
    k0, k1 = split_seed(seed)
    order = np.arange(r, dtype=np.int64)
    cum = np.ascontiguousarray(np.cumsum(t.type_probs, axis=1))
    scale = np.ascontiguousarray(t.severity_mean / t.severity_shape[None, :])
    dom = np.int64(DOMAIN_HISTORY)
    p0, q = negbin_table(t.count_mean, t.dispersion)
    counts = kernels.count_draws(np.int64(0), k0, k1, dom, t.count_mean, t.dispersion, p0, q, order)
    mem, br, y = kernels.emit_episodes(
        np.int64(0), k0, k1, dom, t.count_mean, t.dispersion, p0, q, cum, scale, t.severity_shape, order, counts
    )
    ids = [m.member_id for m in members]
    episodes = tuple(Episode(ids[i], int(j) + 1, float(v)) for i, j, v in zip(mem.tolist(), br.tolist(), y.tolist()))
    return SyntheticData(portfolio, episodes, truth, spec)
