"""Simulation and analysis of driven Frenkel-Kontorova chains.

Modules
-------
model       energy model, forcing and periodic configurations
kernels     compiled/pure-Python force and integrator kernels
dynamics    integration, average velocity, dynamic depinning, synchronization
intersect   crossing counts, defect counts, empirical Lyapunov functional
equilibria  stationary configurations, rotation bands, pinned set
attractor   cylinder portraits and attractor checks
defects     discommensuration initializers and relaxation runs
cli         ``fk`` command-line harness
"""
from .errors import (BracketInvalid, IdenticalConfigurations, InsertionsTooDense, InsufficientSpan,
                     ModelError, NewtonDiverged, NotConverged, StepSizeUnderflow, TooFewPoints)
from .model import Forcing, ModelSpec, PeriodicConfiguration, standard_model, translate

__version__ = "0.1.0"

__all__ = [
    "BracketInvalid",
    "Forcing",
    "IdenticalConfigurations",
    "InsertionsTooDense",
    "InsufficientSpan",
    "ModelError",
    "ModelSpec",
    "NewtonDiverged",
    "NotConverged",
    "PeriodicConfiguration",
    "StepSizeUnderflow",
    "TooFewPoints",
    "standard_model",
    "translate",
    "__version__",
]
