import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hpsolvency.domain import BranchRules, CovariateRecord, Member, PlanDesign, Portfolio
from hpsolvency.engine import GeneratorSpec, generate_synthetic_portfolio

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def make_portfolio(families, J=2, ages=None):
    """``families`` maps family id -> list of member ids."""
    members = []
    k = 0
    for fid, mids in families.items():
        for mid in mids:
            age = 30 + k if ages is None else ages[k]
            members.append(Member(mid, fid, CovariateRecord(age, "M" if k % 2 else "F")))
            k += 1
    return Portfolio.from_members(members, J)


@pytest.fixture
def tiny_portfolio():
    return make_portfolio({"f1": ["A", "B"], "f2": ["C"]}, J=2)


@pytest.fixture(scope="session")
def synthetic_small():
    return generate_synthetic_portfolio(GeneratorSpec(r=200, H=80, J=3), seed=11)


@pytest.fixture
def mixed_plan():
    return PlanDesign(
        {
            1: BranchRules(50.0, 0.2, 1000.0, 1500.0),
            2: BranchRules(0.0, 0.1, None, 400.0),
            3: BranchRules(20.0, 0.0, 300.0, None),
        },
        contribution=150.0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            lines += [v for k, v in rep.user_properties if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
