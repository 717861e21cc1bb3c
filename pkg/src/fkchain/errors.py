"""Exception types shared across modules."""
from __future__ import annotations

from .kernels import StepSizeUnderflow
from .model import ModelError

__all__ = [
    "ModelError",
    "StepSizeUnderflow",
    "NotConverged",
    "BracketInvalid",
    "InsufficientSpan",
    "IdenticalConfigurations",
    "NewtonDiverged",
    "TooFewPoints",
    "InsertionsTooDense",
]


class NotConverged(RuntimeError):
    """A velocity estimate failed the half-window test; ``estimate`` holds the last one."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class BracketInvalid(ValueError):
    """A bisection bracket does not enclose a transition."""


class InsufficientSpan(ValueError):
    """A requested time offset exceeds the sampled trajectory."""


class IdenticalConfigurations(ValueError):
    """Two configurations coincide; no intersections by convention."""


class NewtonDiverged(RuntimeError):
    """Newton iteration did not reach the residual tolerance from this seed."""


class TooFewPoints(ValueError):
    """Not enough points for the requested portrait statistic."""


class InsertionsTooDense(ValueError):
    """Defect insertions closer than two sites apart."""
