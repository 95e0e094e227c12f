import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpsolvency.benefits import (
    FamilyBranchReimbursement,
    adjudicate,
    adjudicate_arrays,
    episode_reimbursement,
    episode_reimbursements,
    family_branch_reimbursement,
    member_branch_reimbursement,
    total_reimbursement,
)
from hpsolvency.domain import BranchRules, Episode, PlanDesign, ValidationError

from conftest import make_portfolio
from oracles import cap_tracking_adjudication, scalar_payment

money = st.floats(0.0, 1e6, allow_nan=False)
caps = st.one_of(st.none(), st.floats(1.0, 1e5))


@st.composite
def rules_st(draw):
    return BranchRules(draw(st.floats(0, 2000)), draw(st.floats(0, 1)), draw(caps), draw(caps))


@st.composite
def episode_table(draw, n_families=4, J=3):
    n = draw(st.integers(0, 40))
    fam = draw(st.lists(st.integers(0, n_families - 1), min_size=n, max_size=n))
    br = draw(st.lists(st.integers(0, J - 1), min_size=n, max_size=n))
    y = draw(st.lists(st.floats(0, 5000), min_size=n, max_size=n))
    return np.array(fam, dtype=np.int64), np.array(br, dtype=np.int64), np.array(y, dtype=float)


class TestEpisode:
    @pytest.mark.parametrize(
        "y, rules, expected",
        [
            (200.0, BranchRules(50.0, 0.2, 1000.0), 150.0),
            (0.0, BranchRules(50.0, 0.2, 1000.0), 0.0),
            (10_000.0, BranchRules(100.0, 0.1, 500.0), 500.0),
            (30.0, BranchRules(50.0, 0.0, 1000.0), 0.0),
        ],
    )
    def test_examples(self, y, rules, expected):
        assert episode_reimbursement(y, rules) == expected

    @given(money)
    def test_pass_through(self, y):
        assert episode_reimbursement(y, BranchRules()) == y

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            episode_reimbursement(-1.0, BranchRules())
        with pytest.raises(ValidationError):
            episode_reimbursements(np.array([1.0, -1.0]), 0.0, 0.0, math.inf)

    @given(money, rules_st())
    def test_bounds_and_scalar_oracle(self, y, rules):
        L = episode_reimbursement(y, rules)
        assert 0.0 <= L <= min(y, rules.episode_cap)
        assert L == scalar_payment(y, rules.deductible, rules.coinsurance, rules.episode_oop_max)
        vec = episode_reimbursements(np.array([y]), rules.deductible, rules.coinsurance, rules.episode_cap)
        assert vec[0] == L

    @given(money, money, rules_st())
    def test_monotone_in_expenditure(self, a, b, rules):
        lo, hi = sorted((a, b))
        assert episode_reimbursement(lo, rules) <= episode_reimbursement(hi, rules)

    @given(money, rules_st(), st.floats(0, 500), st.floats(0, 1), st.floats(0.1, 1.0))
    def test_tightening_never_pays_more(self, y, rules, df, ds, shrink):
        tighter = BranchRules(
            rules.deductible + df,
            max(rules.coinsurance, ds),
            rules.episode_cap * shrink if rules.episode_oop_max is not None else 1000.0,
        )
        assert episode_reimbursement(y, tighter) <= episode_reimbursement(y, rules)


class TestAggregation:
    def test_member_branch(self):
        assert member_branch_reimbursement([]) == 0.0
        assert member_branch_reimbursement([150.0, 500.0]) == 650.0

    @given(st.lists(money, max_size=30), st.randoms())
    def test_member_branch_permutation_invariant(self, ls, rnd):
        shuffled = list(ls)
        rnd.shuffle(shuffled)
        assert member_branch_reimbursement(ls) == member_branch_reimbursement(shuffled)

    def test_family_branch_examples(self):
        r = family_branch_reimbursement([300.0, 400.0], 600.0)
        assert (r.k_hj, r.capped) == (600.0, True)
        r = family_branch_reimbursement([300.0, 400.0], None)
        assert (r.k_hj, r.capped) == (700.0, False)
        assert family_branch_reimbursement([], 50.0).k_hj == 0.0

    @given(st.lists(money, max_size=10), caps)
    def test_family_branch_bounds(self, ks, cap):
        r = family_branch_reimbursement(ks, cap)
        assert 0.0 <= r.k_hj <= math.fsum(ks)
        if cap is not None:
            assert r.k_hj <= cap
        assert r.capped == (cap is not None and math.fsum(ks) > cap)

    def test_total_examples(self):
        assert total_reimbursement([]) == 0.0
        cells = [
            FamilyBranchReimbursement("h1", 1, 600.0, True),
            FamilyBranchReimbursement("h1", 2, 100.0, False),
            FamilyBranchReimbursement("h2", 1, 50.0, False),
        ]
        assert total_reimbursement(cells) == 750.0

    def test_total_rejects_duplicate_cells(self):
        cells = [FamilyBranchReimbursement("h1", 1, 1.0, False), FamilyBranchReimbursement("h1", 1, 2.0, False)]
        with pytest.raises(ValidationError, match="duplicate"):
            total_reimbursement(cells)


def _plan_rules(plan):
    return {j: (r.deductible, r.coinsurance, r.episode_oop_max, r.family_oop_max) for j, r in plan.rules.items()}


def _check_against_oracle(fam, br, y, plan):
    cells = adjudicate_arrays(fam, br, y, plan)
    eps = [(int(h), int(j) + 1, float(v)) for h, j, v in zip(fam, br, y)]
    expected, total = cap_tracking_adjudication(eps, _plan_rules(plan))
    got = {(int(h), int(j) + 1): (float(k), bool(c)) for h, j, k, c in
           zip(cells.family, cells.branch, cells.reimbursement, cells.capped)}  # fmt: skip
    assert got == expected
    assert cells.K == total
    cell_z = {}
    for h, j, v in eps:
        cell_z.setdefault((h, j), []).append(v)
    assert cells.Z == math.fsum(math.fsum(v) for v in cell_z.values())
    return cells


class TestBatchEngine:
    @given(episode_table(), st.lists(rules_st(), min_size=3, max_size=3))
    def test_matches_cap_tracking_oracle(self, table, rules):
        plan = PlanDesign(dict(enumerate(rules, start=1)), 0.0)
        _check_against_oracle(*table, plan)

    @given(episode_table())
    def test_degenerate_plan(self, table):
        fam, br, y = table
        cells = adjudicate_arrays(fam, br, y, PlanDesign.unlimited(3))
        assert cells.K == cells.Z
        assert np.array_equal(cells.reimbursement, cells.expenditure)

    @given(episode_table(), st.lists(rules_st(), min_size=3, max_size=3), st.randoms())
    def test_order_independent(self, table, rules, rnd):
        fam, br, y = table
        plan = PlanDesign(dict(enumerate(rules, start=1)), 0.0)
        perm = list(range(y.size))
        rnd.shuffle(perm)
        a = adjudicate_arrays(fam, br, y, plan)
        b = adjudicate_arrays(fam[perm], br[perm], y[perm], plan)
        assert a.K == b.K and np.array_equal(a.reimbursement, b.reimbursement)

    @given(episode_table(), st.lists(rules_st(), min_size=3, max_size=3), st.floats(0, 300), st.floats(0.2, 1.0))
    def test_tightening_never_increases_any_total(self, table, rules, df, shrink):
        fam, br, y = table
        loose = PlanDesign(dict(enumerate(rules, start=1)), 0.0)
        tight = PlanDesign(
            {
                j: BranchRules(
                    r.deductible + df,
                    r.coinsurance,
                    None if r.episode_oop_max is None else r.episode_oop_max * shrink,
                    500.0 if r.family_oop_max is None else r.family_oop_max * shrink,
                )
                for j, r in loose.rules.items()
            },
            0.0,
        )
        a = adjudicate_arrays(fam, br, y, loose)
        b = adjudicate_arrays(fam, br, y, tight)
        assert np.all(b.reimbursement <= a.reimbursement) and b.K <= a.K
        assert a.K <= a.Z

    def test_random_scenarios_cover_binding_rules(self):
        rnd = random.Random(4)
        capped_seen = False
        for _ in range(300):
            fam = np.array([rnd.randrange(5) for _ in range(30)])
            br = np.array([rnd.randrange(3) for _ in range(30)])
            y = np.array([rnd.choice([0.0, rnd.uniform(0, 80), rnd.uniform(0, 3000)]) for _ in range(30)])
            plan = PlanDesign(
                {
                    1: BranchRules(50.0, 0.2, 1000.0, 1500.0),
                    2: BranchRules(20.0, 0.0, None, 300.0),
                    3: BranchRules(0.0, 0.5, 400.0, None),
                },
                0.0,
            )
            capped_seen |= bool(_check_against_oracle(fam, br, y, plan).capped.any())
        assert capped_seen

    def test_branch_index_checked(self):
        with pytest.raises(ValidationError):
            adjudicate_arrays(np.array([0]), np.array([3]), np.array([1.0]), PlanDesign.unlimited(3))


class TestAdjudicate:
    def test_family_cap_across_members(self):
        p = make_portfolio({"f1": ["A", "B"], "f2": ["C"]}, J=2)
        plan = PlanDesign({1: BranchRules(0.0, 0.0, None, 600.0), 2: BranchRules(10.0, 0.0, None, None)}, 5.0)
        eps = [Episode("A", 1, 300.0), Episode("B", 1, 400.0), Episode("C", 1, 50.0), Episode("C", 2, 5.0)]
        out = adjudicate(eps, p, plan)
        cells = {(c.family_id, c.branch_id): (c.k_hj, c.capped) for c in out.cells}
        assert cells == {("f1", 1): (600.0, True), ("f2", 1): (50.0, False), ("f2", 2): (0.0, False)}
        assert out.K == 650.0 and out.Z == 755.0

    def test_unknown_member(self):
        p = make_portfolio({"f1": ["A"]}, J=1)
        with pytest.raises(ValidationError, match="unknown member_id"):
            adjudicate([Episode("Q", 1, 1.0)], p, PlanDesign.unlimited(1))

    def test_branch_count_mismatch(self):
        p = make_portfolio({"f1": ["A"]}, J=2)
        with pytest.raises(ValidationError):
            adjudicate([], p, PlanDesign.unlimited(3))
