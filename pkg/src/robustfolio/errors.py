"""Exception hierarchy shared across the package.

Exit-code contract (used by the CLI):
    2  invalid configuration (schema violations, bad parameter ranges)
    3  assumption violation (arbitrage, degenerate sensitivity regime,
       boundary optimum where a formula requires interiority, state/action
       incompatibility with the utility domain)
    4  numerical failure (non-convergence, missing root bracket, unwritable
       output path)
"""

from __future__ import annotations


class RobustfolioError(Exception):
    """Base class; `exit_code` drives the CLI process status."""

    exit_code = 1


class ConfigError(RobustfolioError):
    exit_code = 2


class AssumptionViolation(RobustfolioError):
    exit_code = 3


class ArbitrageError(AssumptionViolation):
    """The baseline model admits a strategy with no downside."""


class DegenerateSensitivityError(AssumptionViolation):
    """Finite transport order with exponential-type tails: the first-order
    sensitivity is -inf and the closed forms do not apply."""


class BoundaryOptimumError(AssumptionViolation):
    """The optimizer sits on the action-space boundary where an
    interiority-based formula is requested."""


class DomainCompatibilityError(AssumptionViolation):
    """Wealth can leave the utility domain on the declared state/action box."""


class NumericalFailure(RobustfolioError):
    exit_code = 4
