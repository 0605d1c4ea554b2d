"""Repeated decision problems against Nature with unknown payoffs."""

from nonbayes.errors import (
    ConfigurationError,
    ContractError,
    IntegrityError,
    NonBayesError,
)
from nonbayes.problem import (
    CriterionResult,
    DecisionProblem,
    competitive_ratio,
    max_payoff,
    safety_level,
    true_ratio,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ContractError",
    "CriterionResult",
    "DecisionProblem",
    "IntegrityError",
    "NonBayesError",
    "competitive_ratio",
    "max_payoff",
    "safety_level",
    "true_ratio",
]
