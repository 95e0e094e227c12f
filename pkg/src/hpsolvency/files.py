"""Reading and writing the CSV/JSON input formats.

CSV dialect: comma separated, ``.`` decimal, header row mandatory. Output
files may start with ``#`` comment lines carrying provenance (seed etc.);
readers skip them.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .domain import (
    BranchRules,
    CovariateRecord,
    Episode,
    Member,
    PlanDesign,
    Portfolio,
    ValidationError,
)

PORTFOLIO_HEADER = ["member_id", "family_id", "age", "sex"]
EPISODE_HEADER = ["member_id", "branch_id", "expenditure"]


def format_number(x) -> str:
    """Shortest text that reads back to the same float (or int)."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _data_lines(handle: Iterable[str]):
    return (line for line in handle if not line.startswith("#"))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comments: Dict[str, object] | None = None):
    buf = io.StringIO()
    for k, v in (comments or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else format_number(c) for c in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path) -> Tuple[List[str], List[List[str]], Dict[str, str]]:
    """Return ``(header, rows, comments)``."""
    comments: Dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.readlines()
    for line in lines:
        if line.startswith("#") and "=" in line:
            k, _, v = line[1:].strip().partition("=")
            comments[k.strip()] = v.strip()
    reader = csv.reader(_data_lines(lines))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError(f"{path}: missing header row") from None
    rows = [row for row in reader if row]
    return header, rows, comments


def write_portfolio(p: Portfolio, path) -> None:
    header = PORTFOLIO_HEADER + list(p.extra_schema)
    rows = (
        [m.member_id, m.family_id, m.covariates.age, m.covariates.sex] + [v for _, v in m.covariates.extra]
        for m in p.members
    )
    write_csv(path, header, rows)


def read_portfolio(path, n_branches: int) -> Portfolio:
    header, rows, _ = read_csv(path)
    if header[:4] != PORTFOLIO_HEADER:
        raise ValidationError(f"{path}: header must start with {','.join(PORTFOLIO_HEADER)}, got {','.join(header)}")
    extra = header[4:]
    members = []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            age = int(row[2])
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: age {row[2]!r} is not an integer") from None
        cov = CovariateRecord(age, row[3], tuple(zip(extra, map(_parse_value, row[4:]))))
        members.append(Member(row[0], row[1], cov))
    if not members:
        raise ValidationError(f"{path}: no members")
    return Portfolio.from_members(members, n_branches, extra)


def plan_to_dict(plan: PlanDesign) -> dict:
    return {
        "contribution": plan.contribution,
        "branches": [
            {
                "id": j,
                "name": plan.branch_names.get(j, f"branch_{j}"),
                "deductible": r.deductible,
                "coinsurance": r.coinsurance,
                "episode_oop_max": r.episode_oop_max,
                "family_oop_max": r.family_oop_max,
            }
            for j, r in plan.rules.items()
        ],
    }


def plan_from_dict(doc: dict) -> PlanDesign:
    try:
        rules, names = {}, {}
        for b in doc["branches"]:
            j = int(b["id"])
            if j in rules:
                raise ValidationError(f"duplicate branch id {j} in plan")
            rules[j] = BranchRules(
                float(b.get("deductible", 0.0)),
                float(b.get("coinsurance", 0.0)),
                None if b.get("episode_oop_max") is None else float(b["episode_oop_max"]),
                None if b.get("family_oop_max") is None else float(b["family_oop_max"]),
            )
            names[j] = b.get("name", f"branch_{j}")
        return PlanDesign(rules, float(doc["contribution"]), names)
    except KeyError as exc:
        raise ValidationError(f"plan design is missing field {exc}") from None


def read_plan(path) -> PlanDesign:
    with open(path, encoding="utf-8") as fh:
        return plan_from_dict(json.load(fh))


def write_plan(plan: PlanDesign, path) -> None:
    write_json(plan_to_dict(plan), path)


def write_episodes(episodes: Sequence[Episode], path) -> None:
    write_csv(path, EPISODE_HEADER, ([e.member_id, e.branch_id, e.expenditure] for e in episodes))


def read_episodes(path) -> List[Episode]:
    header, rows, _ = read_csv(path)
    if header != EPISODE_HEADER:
        raise ValidationError(f"{path}: header must be {','.join(EPISODE_HEADER)}")
    out = []
    for lineno, row in enumerate(rows, start=2):
        try:
            out.append(Episode(row[0], int(row[1]), float(row[2])))
        except (ValueError, IndexError):
            raise ValidationError(f"{path}:{lineno}: malformed episode row {row}") from None
    return out


def check_episode_members(episodes: Sequence[Episode], portfolio: Portfolio) -> None:
    known = portfolio.member_index()
    unknown = sorted({e.member_id for e in episodes if e.member_id not in known})
    if unknown:
        shown = ", ".join(unknown[:20]) + (" ..." if len(unknown) > 20 else "")
        raise ValidationError(f"episodes reference unknown member_id: {shown}")
    bad = sorted({e.branch_id for e in episodes if not 1 <= e.branch_id <= portfolio.J})
    if bad:
        raise ValidationError(f"episodes reference branch ids outside 1..{portfolio.J}: {bad}")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, default=_json_default, allow_nan=False) + "\n"


def write_json(doc, path) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def finite_or_none(x: float):
    return float(x) if math.isfinite(x) else None


# -- simulated distributions --------------------------------------------------

DISTRIBUTION_HEADER = ["scenario_index", "value"]
HISTOGRAM_HEADER = ["bin_left", "bin_right", "count"]


def write_distribution(values: np.ndarray, path, label: str, seed: int, extra: Dict[str, object] | None = None) -> None:
    """Per-scenario values in scenario order, with seed and label in the header comments."""
    values = np.asarray(values, dtype=float)
    comments = {"label": label, "seed": int(seed), "n_scenarios": int(values.shape[0])}
    comments.update(extra or {})
    write_csv(path, DISTRIBUTION_HEADER, ((i, v) for i, v in enumerate(values.tolist())), comments)


def read_distribution_values(path) -> Tuple[np.ndarray, Dict[str, str]]:
    """Values in scenario order plus the header comments."""
    header, rows, comments = read_csv(path)
    if header != DISTRIBUTION_HEADER:
        raise ValidationError(f"{path}: header must be {','.join(DISTRIBUTION_HEADER)}")
    if not rows:
        raise ValidationError(f"{path}: empty distribution")
    try:
        index = np.array([int(r[0]) for r in rows], dtype=np.int64)
        values = np.array([float(r[1]) for r in rows], dtype=float)
    except (ValueError, IndexError):
        raise ValidationError(f"{path}: malformed distribution row") from None
    if not np.array_equal(index, np.arange(index.size)):
        raise ValidationError(f"{path}: scenario indices must run 0..n-1 in order")
    return values, comments


def read_distribution(path):
    """The file as an :class:`EmpiricalDistribution` (seed and label from the header)."""
    from .engine.simulate import EmpiricalDistribution

    values, comments = read_distribution_values(path)
    try:
        seed = int(comments.get("seed", 0))
    except ValueError:
        raise ValidationError(f"{path}: malformed seed comment") from None
    return EmpiricalDistribution(values, seed, comments.get("label", ""))


def histogram(values: np.ndarray):
    """Counts and edges with the Freedman-Diaconis bin width (one bin for a constant sample)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValidationError("cannot histogram an empty sample")
    if values[0] == values[-1] and np.all(values == values[0]):
        return np.array([values.size]), np.array([values[0] - 0.5, values[0] + 0.5])
    return np.histogram(values, bins="fd")


def write_histogram(values: np.ndarray, path, label: str, seed: int) -> None:
    counts, edges = histogram(values)
    rows = ((a, b, int(c)) for a, b, c in zip(edges[:-1].tolist(), edges[1:].tolist(), counts.tolist()))
    write_csv(path, HISTOGRAM_HEADER, rows, {"label": label, "seed": int(seed), "bin_rule": "freedman-diaconis"})


def read_histogram(path) -> Tuple[np.ndarray, np.ndarray]:
    """``(edges, counts)`` from a histogram CSV."""
    header, rows, _ = read_csv(path)
    if header != HISTOGRAM_HEADER or not rows:
        raise ValidationError(f"{path}: not a histogram file")
    left = [float(r[0]) for r in rows]
    edges = np.array(left + [float(rows[-1][1])])
    return edges, np.array([int(r[2]) for r in rows], dtype=np.int64)
