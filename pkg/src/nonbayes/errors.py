"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class NonBayesError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(NonBayesError, ValueError):
    """A problem, strategy or experiment was configured inconsistently."""


class ContractError(NonBayesError):
    """A strategy was used outside the class it is defined for."""


class IntegrityError(NonBayesError):
    """Observed data contradicts the repeated-game model."""
