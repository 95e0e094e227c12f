"""Monte Carlo moments of single member-years, for checking the expectation identities."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..benefits import episode_reimbursements
from ..domain import BranchRules, CovariateRecord, PlanDesign
from ..glm import ThreePartModel, sample_severity
from ..rng import DOMAIN_SEVERITY_PROBE, DOMAIN_SIMULATION, Stream, negbin_table, split_seed
from . import kernels


@dataclass(frozen=True)
class MemberBranchMoments:
    """Means and standard errors over ``n_years`` simulated years, shape (members, J)."""

    n_years: int
    mean_N: np.ndarray
    se_N: np.ndarray
    mean_Z: np.ndarray
    se_Z: np.ndarray
    mean_K: np.ndarray
    se_K: np.ndarray


def member_branch_moments(
    model: ThreePartModel,
    records: Sequence[CovariateRecord],
    plan: PlanDesign,
    seed: int,
    n_years: int,
    domain: int = DOMAIN_SIMULATION,
) -> MemberBranchMoments:
    """Per (member, branch) episode count N_ij, expenditure Z_ij and reimbursement K_ij.

    K_ij here is the member's own total (no family cap). Member ``a`` uses
    the substream of member position ``a``.
    """
    t = model.tables(list(records))
    cum = np.ascontiguousarray(np.cumsum(t.type_probs, axis=1))
    scale = np.ascontiguousarray(t.severity_mean / t.severity_shape[None, :])
    f, s, M, _ = plan.arrays()
    members = np.arange(len(records), dtype=np.int64)
    out = np.zeros((len(records), model.J, 6))
    k0, k1 = split_seed(seed)
    kernels.member_year_moments(
        np.int64(0), np.int64(n_years), k0, k1, np.int64(domain),
        t.count_mean, t.dispersion, *negbin_table(t.count_mean, t.dispersion),
        cum, scale, t.severity_shape, members,
        f, s, M, out,
    )  # fmt: skip
    n = float(n_years)

    def mean_se(k):
        m = out[..., k] / n
        var = np.maximum(out[..., k + 1] / n - m * m, 0.0) * n / (n - 1.0)
        return m, np.sqrt(var / n)

    return MemberBranchMoments(n_years, *mean_se(0), *mean_se(2), *mean_se(4))


def episode_reimbursement_moments(
    model: ThreePartModel,
    x: CovariateRecord,
    branch_id: int,
    rules: BranchRules,
    seed: int,
    n_draws: int,
    member: int = 0,
):
    """Mean and standard error of the per-episode payment L_ij from direct severity draws."""
    stream = Stream(seed, scenario=branch_id, member=member, domain=DOMAIN_SEVERITY_PROBE)
    y = sample_severity(model.severity, x, branch_id, stream, size=n_draws)
    L = episode_reimbursements(y, rules.deductible, rules.coinsurance, rules.episode_cap)
    return float(L.mean()), float(L.std(ddof=1) / np.sqrt(n_draws))
