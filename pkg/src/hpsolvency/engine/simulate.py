"""Monte Carlo simulation of one plan year, scenario by scenario."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..benefits import CellTotals, adjudicate_arrays
from ..domain import PlanDesign, Portfolio, ValidationError, family_layout, require_valid
from ..glm import MemberTables, ThreePartModel
from ..rng import DOMAIN_SIMULATION, negbin_table, split_seed
from . import kernels
from .expect import contributions

logger = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    n_scenarios: int
    seed: int = 0
    threads: Optional[int] = None
    keep_detail: bool = False

    def __post_init__(self):
        if int(self.n_scenarios) < 1:
            raise ValidationError("n_scenarios must be >= 1")
        split_seed(self.seed)
        if self.threads is not None and int(self.threads) < 1:
            raise ValidationError("threads must be >= 1")

    @property
    def workers(self) -> int:
        return int(self.threads) if self.threads else (os.cpu_count() or 1)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Sorted simulated sample of one scalar quantity."""

    values: np.ndarray
    seed: int
    label: str

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def mean(self) -> float:
        return math.fsum(self.values) / self.n

    def std_error(self) -> float:
        if self.n < 2:
            return 0.0
        m = self.mean()
        return math.sqrt(math.fsum((self.values - m) ** 2) / (self.n - 1) / self.n)


@dataclass(frozen=True)
class ScenarioResult:
    index: int
    Z: float
    K: float
    U: float
    detail: Optional[CellTotals] = None


@dataclass(frozen=True)
class SimulationResult:
    seed: int
    contribution_total: float
    Z: np.ndarray  # per scenario, in scenario order
    K: np.ndarray
    U: np.ndarray
    dist_Z: EmpiricalDistribution = field(repr=False)
    dist_K: EmpiricalDistribution = field(repr=False)
    dist_U: EmpiricalDistribution = field(repr=False)

    @property
    def n_scenarios(self) -> int:
        return int(self.Z.shape[0])

    def summary(self) -> Dict:
        out = {"n_scenarios": self.n_scenarios, "seed": self.seed, "contributions": self.contribution_total}
        for d in (self.dist_Z, self.dist_K, self.dist_U):
            out[d.label] = {
                "mean": d.mean(),
                "std_error": d.std_error(),
                "min": float(d.values[0]),
                "max": float(d.values[-1]),
            }
        return out


@dataclass(frozen=True)
class PreparedRun:
    """Model tables and rule arrays laid out for the kernels.

    Table rows follow ``order`` (members grouped by family); ``order[a]`` is
    the portfolio position of row ``a``.
    """

    mu: np.ndarray
    size: float
    p0: np.ndarray
    q: np.ndarray
    cum: np.ndarray
    scale: np.ndarray
    shape: np.ndarray
    order: np.ndarray
    offsets: np.ndarray
    rules: tuple
    contribution_total: float


def prepare(model: ThreePartModel, portfolio: Portfolio, plan: PlanDesign) -> PreparedRun:
    require_valid(portfolio)
    if not (model.J == portfolio.J == plan.n_branches):
        raise ValidationError(f"branch counts differ: model {model.J}, portfolio {portfolio.J}, plan {plan.n_branches}")
    t = model.tables([m.covariates for m in portfolio.members])
    return _prepare_tables(t, portfolio, plan)


def _prepare_tables(t: MemberTables, portfolio: Portfolio, plan: PlanDesign) -> PreparedRun:
    layout = family_layout(portfolio)
    order = layout.order
    mu = np.ascontiguousarray(t.count_mean[order], dtype=float)
    return PreparedRun(
        mu,
        float(t.dispersion),
        *negbin_table(mu, float(t.dispersion)),
        np.ascontiguousarray(np.cumsum(t.type_probs[order], axis=1)),
        np.ascontiguousarray(t.severity_mean[order] / t.severity_shape[None, :]),
        np.ascontiguousarray(t.severity_shape, dtype=float),
        layout.order,
        layout.offsets,
        plan.arrays(),
        contributions(plan, portfolio),
    )


def _run_chunk(prep: PreparedRun, key, first: int, count: int, z_out, k_out, domain=DOMAIN_SIMULATION):
    kernels.simulate_totals(
        np.int64(first), np.int64(count), key[0], key[1], np.int64(domain),
        prep.mu, prep.size, prep.p0, prep.q, prep.cum, prep.scale, prep.shape,
        prep.order, prep.offsets,
        *prep.rules,
        z_out, k_out,
    )  # fmt: skip


def simulate_prepared(prep: PreparedRun, config: SimulationConfig):
    """Per-scenario ``(Z, K)`` arrays, in scenario order."""
    n = int(config.n_scenarios)
    key = split_seed(config.seed)
    try:
        Z = np.empty(n)
        K = np.empty(n)
    except MemoryError:
        raise SimulationError(f"cannot allocate result arrays for {n} scenarios") from None
    workers = min(config.workers, n)
    # chunks are contiguous scenario ranges; each writes only its own slice
    bounds = np.linspace(0, n, workers + 1).astype(np.int64)
    jobs = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    try:
        if workers == 1:
            for a, b in jobs:
                _run_chunk(prep, key, a, b - a, Z[a:b], K[a:b])
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_run_chunk, prep, key, a, b - a, Z[a:b], K[a:b]) for a, b in jobs]
                for fut in futures:
                    fut.result()
    except MemoryError:
        raise SimulationError("out of memory during simulation; partial results discarded") from None
    return Z, K


def run_simulation(model: ThreePartModel, portfolio: Portfolio, plan: PlanDesign, config: SimulationConfig) -> SimulationResult:
    """Simulate ``config.n_scenarios`` independent plan years.

    Scenario ``s`` uses substreams keyed by ``(seed, s, member)``, so the
    output does not depend on ``config.threads``.
    """
    prep = prepare(model, portfolio, plan)
    return _result(prep, config, *simulate_prepared(prep, config))


def _result(prep: PreparedRun, config: SimulationConfig, Z, K) -> SimulationResult:
    C = prep.contribution_total
    U = C - K
    logger.info("simulated %d scenarios (seed %d)", Z.shape[0], config.seed)
    return SimulationResult(
        int(config.seed),
        C,
        Z,
        K,
        U,
        EmpiricalDistribution(Z, config.seed, "Z"),
        EmpiricalDistribution(K, config.seed, "K"),
        EmpiricalDistribution(U, config.seed, "U"),
    )


def scenario_episodes(prep: PreparedRun, seed: int, index: int, domain: int = DOMAIN_SIMULATION):
    """Episodes of one scenario as ``(member position, branch index, expenditure)`` arrays."""
    k0, k1 = split_seed(seed)
    counts = kernels.count_draws(
        np.int64(index), k0, k1, np.int64(domain), prep.mu, prep.size, prep.p0, prep.q, prep.order
    )
    return kernels.emit_episodes(
        np.int64(index), k0, k1, np.int64(domain), prep.mu, prep.size, prep.p0, prep.q,
        prep.cum, prep.scale, prep.shape, prep.order, counts,
    )


def simulate_scenario(
    model: ThreePartModel,
    portfolio: Portfolio,
    plan: PlanDesign,
    seed: int,
    index: int = 0,
    detail: bool = False,
    prep: Optional[PreparedRun] = None,
) -> ScenarioResult:
    """One plan year, adjudicated through the benefits module.

    Draws are identical to scenario ``index`` of :func:`run_simulation`; the
    totals here are correctly rounded sums, so they can differ from the
    kernel's running sums in the last bits.
    """
    prep = prep or prepare(model, portfolio, plan)
    mem, br, y = scenario_episodes(prep, seed, index)
    layout = family_layout(portfolio)
    cells = adjudicate_arrays(layout.family_of[mem], br, y, plan)
    K = cells.K
    return ScenarioResult(int(index), cells.Z, K, prep.contribution_total - K, cells if detail else None)
