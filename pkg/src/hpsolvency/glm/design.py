from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from ..domain import CovariateRecord, ValidationError

FAMILIES = ("neg_binomial", "multinomial", "gamma")
_DEFAULT_LINK = {"neg_binomial": "log", "gamma": "log", "multinomial": "logit_multinomial"}


@dataclass(frozen=True)
class Term:
    """One covariate effect.

    ``numeric`` terms contribute ``((value - center) / scale) ** power``.
    ``categorical`` terms are one-hot coded against the first entry of ``levels``.
    """

    name: str
    kind: str = "numeric"
    levels: Tuple[str, ...] = ()
    power: int = 1
    center: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if self.kind not in ("numeric", "categorical"):
            raise ValidationError(f"term {self.name}: unknown kind {self.kind!r}")
        if self.kind == "categorical" and len(self.levels) < 2:
            raise ValidationError(f"term {self.name}: categorical terms need at least two levels")
        if self.power < 1:
            raise ValidationError(f"term {self.name}: power must be >= 1")
        if not self.scale > 0:
            raise ValidationError(f"term {self.name}: scale must be > 0")

    @property
    def columns(self) -> List[str]:
        if self.kind == "categorical":
            return [f"{self.name}[{lvl}]" for lvl in self.levels[1:]]
        label = self.name
        if self.center != 0.0 or self.scale != 1.0:
            label = f"({self.name}-{self.center:g})/{self.scale:g}"
        return [label if self.power == 1 else f"{label}^{self.power}"]

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.kind == "categorical":
            d["levels"] = list(self.levels)
        if self.power != 1:
            d["power"] = self.power
        if self.center != 0.0:
            d["center"] = self.center
        if self.scale != 1.0:
            d["scale"] = self.scale
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Term":
        return cls(
            d["name"],
            d.get("kind", "numeric"),
            tuple(d.get("levels", ())),
            int(d.get("power", 1)),
            float(d.get("center", 0.0)),
            float(d.get("scale", 1.0)),
        )


@dataclass(frozen=True)
class ModelSpec:
    """Covariate layout shared by fitting and prediction. The intercept is implicit and always first."""

    terms: Tuple[Term, ...] = field(default_factory=tuple)
    family: str = "neg_binomial"
    link: str = ""

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown model family {self.family!r}")
        if not self.link:
            object.__setattr__(self, "link", _DEFAULT_LINK[self.family])
        if self.link != _DEFAULT_LINK[self.family]:
            raise ValidationError(f"{self.family} models use the {_DEFAULT_LINK[self.family]} link, not {self.link}")
        names = [t.name for t in self.terms]
        if len(set(tuple(t.columns) for t in self.terms)) != len(self.terms):
            raise ValidationError(f"duplicate terms in {names}")

    @property
    def column_names(self) -> List[str]:
        cols = ["intercept"]
        for t in self.terms:
            cols.extend(t.columns)
        return cols

    @property
    def width(self) -> int:
        return len(self.column_names)

    def with_family(self, family: str) -> "ModelSpec":
        return ModelSpec(self.terms, family)

    def intercept_only(self) -> "ModelSpec":
        return ModelSpec((), self.family)

    def to_dict(self) -> dict:
        return {"family": self.family, "link": self.link, "terms": [t.to_dict() for t in self.terms]}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(tuple(Term.from_dict(t) for t in d.get("terms", [])), d.get("family", "neg_binomial"))


def default_terms() -> Tuple[Term, ...]:
    """Intercept + age + sex (reference F)."""
    return (Term("age"), Term("sex", "categorical", ("F", "M")))


def build_design_matrix(members: Sequence[CovariateRecord], spec: ModelSpec) -> np.ndarray:
    """One row per member; column 0 is the intercept."""
    X = np.empty((len(members), spec.width))
    X[:, 0] = 1.0
    col = 1
    for t in spec.terms:
        try:
            values = [rec.get(t.name) for rec in members]
        except KeyError:
            raise ValidationError(f"covariate {t.name!r} required by the model is missing") from None
        if t.kind == "numeric":
            try:
                v = np.asarray(values, dtype=float)
            except (TypeError, ValueError):
                raise ValidationError(f"covariate {t.name!r} must be numeric") from None
            if t.center != 0.0 or t.scale != 1.0:
                v = (v - t.center) / t.scale
            X[:, col] = v**t.power
            col += 1
        else:
            index = {lvl: k for k, lvl in enumerate(t.levels)}
            codes = np.empty(len(values), dtype=np.int64)
            for n, v in enumerate(values):
                k = index.get(str(v))
                if k is None:
                    raise ValidationError(f"unknown category {v!r} for {t.name!r}; declared levels {list(t.levels)}")
                codes[n] = k
            block = X[:, col : col + len(t.levels) - 1]
            block[:] = 0.0
            for k in range(1, len(t.levels)):
                block[codes == k, k - 1] = 1.0
            col += len(t.levels) - 1
    return X
