"""Health-plan solvency simulation: three-part claims model, benefit rules, Monte Carlo profit and capital."""

__version__ = "0.1.0"
