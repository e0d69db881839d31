"""Exceptions raised across the toolkit.

Every failure carries a readable ``detail`` and an optional ``context`` dict
(worst probe point, offending sample, ...). The CLI maps them to exit code 1
and the HTTP layer to 4xx responses.
"""
from typing import Any, Optional


class ProjectionError(Exception):
    """Base class for every toolkit error."""

    def __init__(self, detail: str, context: Optional[dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.context = context or {}

    def __str__(self) -> str:
        if not self.context:
            return self.detail
        extras = ", ".join(f"{key}={value}" for key, value in self.context.items())
        return f"{self.detail} ({extras})"


# ==================== SIGNALS ====================
class MalformedHeader(ProjectionError):
    pass


class NonUniformGrid(ProjectionError):
    pass


class NonFiniteValue(ProjectionError):
    pass


class EmptyWindow(ProjectionError):
    pass


class LengthMismatch(ProjectionError):
    pass


class DimensionMismatch(ProjectionError):
    pass


# ==================== SYSTEMS ====================
class GridMismatch(ProjectionError):
    pass


class IntegrationDiverged(ProjectionError):
    pass


# ==================== FACTORIZATION ====================
class SingularV(ProjectionError):
    pass


class SingularW(ProjectionError):
    pass


class HjeResidualTooLarge(ProjectionError):
    pass


class GainConditionViolated(ProjectionError):
    pass


class NotNormalized(ProjectionError):
    pass


class RiccatiNoStabilizingSolution(ProjectionError):
    pass


class RiccatiNotConverged(ProjectionError):
    pass


# ==================== DIVERGENCE ====================
class FormulaDisagreement(ProjectionError):
    pass


class GammaOutOfRange(ProjectionError):
    pass


class AlphaOutOfRange(ProjectionError):
    pass


class MinimalityViolated(ProjectionError):
    pass


# ==================== ESTIMATION ====================
class UnstablePerturbedGain(ProjectionError):
    pass


class OptimalityViolated(ProjectionError):
    pass


# ==================== HARNESS ====================
class ConfigInvalid(ProjectionError):
    pass
