import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpsolvency.domain import (
    Branch,
    BranchRules,
    CovariateRecord,
    Episode,
    Family,
    Member,
    PlanDesign,
    Portfolio,
    ValidationError,
    family_layout,
    group_by_family,
    validate_portfolio,
)

from conftest import make_portfolio


def _member(mid, fid, age=40, sex="M", extra=()):
    return Member(mid, fid, CovariateRecord(age, sex, extra))


class TestValidation:
    def test_minimal_valid(self):
        p = make_portfolio({"f1": ["A", "B"]})
        report = validate_portfolio(p)
        assert report.valid and report.violations == ()

    def test_orphan_family_reference(self):
        p = Portfolio(
            (_member("A", "f1"), _member("B", "f9")),
            (Family("f1", ("A",)),),
            (Branch(1), Branch(2)),
        )
        assert validate_portfolio(p).kinds() == ["orphan family reference"]

    def test_duplicate_member_id(self):
        p = Portfolio((_member("A", "f1"), _member("A", "f1")), (Family("f1", ("A",)),), (Branch(1),))
        assert validate_portfolio(p).kinds() == ["duplicate member id"]

    def test_covariate_schema_mismatch(self):
        members = (_member("A", "f1", extra=(("region", "N"),)), _member("B", "f1"))
        p = Portfolio.from_members(members, 2)
        assert validate_portfolio(p).kinds() == ["covariate schema mismatch"]

    def test_reports_every_violation(self):
        p = Portfolio(
            (_member("A", "f1"), _member("A", "f2"), _member("C", "f3")),
            (Family("f1", ("A",)), Family("f1", ("Z",))),
            (Branch(2),),
        )
        kinds = set(validate_portfolio(p).kinds())
        assert {"duplicate member id", "duplicate family id", "orphan family reference", "unknown family member",
                "branch ids"} <= kinds  # fmt: skip

    def test_empty(self):
        assert "empty portfolio" in validate_portfolio(Portfolio((), (), ())).kinds()

    def test_member_in_two_families(self):
        p = Portfolio(
            (_member("A", "f1"),),
            (Family("f1", ("A",)), Family("f2", ("A",))),
            (Branch(1),),
        )
        assert "member in several families" in validate_portfolio(p).kinds()


class TestGrouping:
    def test_three_members_two_families(self):
        p = make_portfolio({"f1": ["A", "B"], "f2": ["C"]})
        assert group_by_family(p) == {"f1": [0, 1], "f2": [2]}

    def test_singleton(self):
        p = make_portfolio({"f1": ["A"]})
        assert group_by_family(p) == {"f1": [0]}

    def test_one_family(self):
        p = make_portfolio({"f": [f"m{i}" for i in range(25)]})
        g = group_by_family(p)
        assert p.H == 1 and list(g) == ["f"] and len(g["f"]) == 25

    def test_rejects_invalid(self):
        p = Portfolio((_member("A", "f1"), _member("A", "f1")), (Family("f1", ("A",)),), (Branch(1),))
        with pytest.raises(ValidationError):
            group_by_family(p)

    @given(st.lists(st.integers(0, 6), min_size=1, max_size=60))
    def test_partition(self, fam_of):
        members = [_member(f"m{i}", f"f{h}") for i, h in enumerate(fam_of)]
        p = Portfolio.from_members(members, 1)
        groups = group_by_family(p)
        positions = [i for g in groups.values() for i in g]
        assert sorted(positions) == list(range(p.r))
        assert p.H == len(set(fam_of)) <= p.r
        for fid, g in groups.items():
            assert all(p.members[i].family_id == fid for i in g)

    def test_layout_is_csr(self):
        p = make_portfolio({"f1": ["A"], "f2": ["B", "C"]})
        p = Portfolio.from_members([p.members[1], p.members[0], p.members[2]], 2)
        lay = family_layout(p)
        for h, f in enumerate(p.families):
            got = [p.members[i].member_id for i in lay.order[lay.offsets[h]: lay.offsets[h + 1]]]
            assert got == list(f.member_ids)
            assert all(lay.family_of[i] == h for i in lay.order[lay.offsets[h]: lay.offsets[h + 1]])


class TestRules:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"coinsurance": -0.1},
            {"coinsurance": 1.5},
            {"deductible": -1.0},
            {"deductible": float("nan")},
            {"episode_oop_max": 0.0},
            {"family_oop_max": -5.0},
        ],
    )
    def test_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            BranchRules(**kwargs)

    @given(st.floats(0, 1e6), st.floats(0, 1))
    def test_accepted(self, f, s):
        r = BranchRules(f, s)
        assert r.episode_oop_max is None and r.family_oop_max is None

    def test_plan_needs_contiguous_branches(self):
        with pytest.raises(ValidationError):
            PlanDesign({1: BranchRules(), 3: BranchRules()}, 10.0)
        with pytest.raises(ValidationError):
            PlanDesign({1: BranchRules()}, -1.0)

    def test_covariates(self):
        with pytest.raises(ValidationError):
            CovariateRecord(-1, "M")
        with pytest.raises(ValidationError):
            CovariateRecord(30, "X")
        with pytest.raises(ValidationError):
            Episode("A", 1, -0.5)
