"""Compiled scenario loops.

Draw order inside one member-year substream is fixed: the episode count,
then ``(branch, severity)`` for each episode in turn
(:func:`hpsolvency.rng.branch_and_severity`).

Member tables (``mu``, ``p0``, ``q``, ``cum``, ``scale``) are laid out in
visiting order: row ``a`` belongs to member ``members[a]``, whose portfolio
position keys the random substream. Reading the tables sequentially keeps the
loops out of cache misses.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..rng import MASK32, branch_and_severity, negbin_pq

_SH32 = np.uint64(32)
_SH16 = np.uint64(16)


@njit(cache=True, inline="always")
def _scenario_words(scen, domain):
    s = np.uint64(scen)
    return s & MASK32, (s >> _SH32) | (np.uint64(domain) << _SH16)


@njit(cache=True, nogil=True)
def simulate_totals(
    first, count, k0, k1, domain,
    mu, size, p0, q, cum, scale, shape,
    members, offsets,
    deductible, coinsurance, episode_cap, family_cap,
    z_out, k_out,
):  # fmt: skip
    """Total expenditure and capped reimbursement for scenarios ``first .. first + count - 1``.

    Families are visited in order; within a family, per-branch accumulators
    collect expenditure and episode payments, and branches are flushed in the
    order they were first touched. Z and K share that grouping, so a plan
    that pays every episode in full gives K == Z bit for bit.
    """
    J = cum.shape[1]
    H = offsets.shape[0] - 1
    zf = np.zeros(J)
    kf = np.zeros(J)
    touched = np.empty(J, dtype=np.int64)
    active = np.zeros(J, dtype=np.bool_)
    for t in range(count):
        c2, c3 = _scenario_words(first + t, domain)
        Z = 0.0
        K = 0.0
        for h in range(H):
            nt = 0
            for a in range(offsets[h], offsets[h + 1]):
                c1 = np.uint64(members[a])
                ctr = 0
                n_ep, ctr = negbin_pq(mu[a], size, p0[a], q[a], k0, k1, c1, c2, c3, ctr)
                for _ in range(n_ep):
                    j, g, ctr = branch_and_severity(cum[a], shape, k0, k1, c1, c2, c3, ctr)
                    y = g * scale[a, j]
                    L = min(y - max(coinsurance[j] * y, deductible[j]), episode_cap[j])
                    if L < 0.0:
                        L = 0.0
                    if not active[j]:
                        active[j] = True
                        touched[nt] = j
                        nt += 1
                    zf[j] += y
                    kf[j] += L
            for m in range(nt):
                j = touched[m]
                Z += zf[j]
                K += min(kf[j], family_cap[j])
                zf[j] = 0.0
                kf[j] = 0.0
                active[j] = False
        z_out[t] = Z
        k_out[t] = K


@njit(cache=True, nogil=True)
def count_draws(scen, k0, k1, domain, mu, size, p0, q, members):
    """Episode counts of ``members`` in one scenario (first draw of each substream), in row order."""
    c2, c3 = _scenario_words(scen, domain)
    out = np.empty(members.shape[0], dtype=np.int64)
    for a in range(members.shape[0]):
        out[a], _ = negbin_pq(mu[a], size, p0[a], q[a], k0, k1, np.uint64(members[a]), c2, c3, 0)
    return out


@njit(cache=True, nogil=True)
def emit_episodes(scen, k0, k1, domain, mu, size, p0, q, cum, scale, shape, members, counts):
    """Every episode of one scenario as ``(member, branch index, expenditure)`` arrays."""
    total = 0
    for a in range(counts.shape[0]):
        total += counts[a]
    mem = np.empty(total, dtype=np.int64)
    br = np.empty(total, dtype=np.int64)
    y = np.empty(total)
    c2, c3 = _scenario_words(scen, domain)
    e = 0
    for a in range(members.shape[0]):
        c1 = np.uint64(members[a])
        n_ep, ctr = negbin_pq(mu[a], size, p0[a], q[a], k0, k1, c1, c2, c3, 0)
        for _ in range(n_ep):
            j, g, ctr = branch_and_severity(cum[a], shape, k0, k1, c1, c2, c3, ctr)
            mem[e] = members[a]
            br[e] = j
            y[e] = g * scale[a, j]
            e += 1
    return mem, br, y


@njit(cache=True, nogil=True)
def member_year_moments(
    first, count, k0, k1, domain,
    mu, size, p0, q, cum, scale, shape, members,
    deductible, coinsurance, episode_cap,
    out,
):  # fmt: skip
    """Accumulate per (member, branch) sums over ``count`` independent member-years.

    ``out[a, j, :]`` receives the sum and sum of squares of N_ij, Z_ij and
    K_ij (before any family cap) for ``members[a]``, in that order.
    """
    J = cum.shape[1]
    n_ij = np.zeros(J)
    z_ij = np.zeros(J)
    k_ij = np.zeros(J)
    for a in range(members.shape[0]):
        c1 = np.uint64(members[a])
        for t in range(count):
            c2, c3 = _scenario_words(first + t, domain)
            n_ep, ctr = negbin_pq(mu[a], size, p0[a], q[a], k0, k1, c1, c2, c3, 0)
            for _ in range(n_ep):
                j, g, ctr = branch_and_severity(cum[a], shape, k0, k1, c1, c2, c3, ctr)
                y = g * scale[a, j]
                L = min(y - max(coinsurance[j] * y, deductible[j]), episode_cap[j])
                if L < 0.0:
                    L = 0.0
                n_ij[j] += 1.0
                z_ij[j] += y
                k_ij[j] += L
            for j in range(J):
                out[a, j, 0] += n_ij[j]
                out[a, j, 1] += n_ij[j] * n_ij[j]
                out[a, j, 2] += z_ij[j]
                out[a, j, 3] += z_ij[j] * z_ij[j]
                out[a, j, 4] += k_ij[j]
                out[a, j, 5] += k_ij[j] * k_ij[j]
                n_ij[j] = 0.0
                z_ij[j] = 0.0
                k_ij[j] = 0.0
