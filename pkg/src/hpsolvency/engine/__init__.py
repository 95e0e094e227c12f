"""Expected expenditure, Monte Carlo simulation and synthetic data."""

from .expect import ExpectedExpenditureReport, contributions, expected_member_branch, expected_totals
from .moments import MemberBranchMoments, episode_reimbursement_moments, member_branch_moments
from .simulate import (
    EmpiricalDistribution,
    PreparedRun,
    ScenarioResult,
    SimulationConfig,
    SimulationError,
    SimulationResult,
    prepare,
    run_simulation,
    scenario_episodes,
    simulate_prepared,
    simulate_scenario,
)
from .synthetic import GeneratorSpec, SyntheticData, default_generator_terms, generate_synthetic_portfolio

__all__ = [
    "EmpiricalDistribution",
    "ExpectedExpenditureReport",
    "GeneratorSpec",
    "MemberBranchMoments",
    "PreparedRun",
    "ScenarioResult",
    "SimulationConfig",
    "SimulationError",
    "SimulationResult",
    "SyntheticData",
    "contributions",
    "default_generator_terms",
    "episode_reimbursement_moments",
    "expected_member_branch",
    "expected_totals",
    "generate_synthetic_portfolio",
    "member_branch_moments",
    "prepare",
    "run_simulation",
    "scenario_episodes",
    "simulate_prepared",
    "simulate_scenario",
]
