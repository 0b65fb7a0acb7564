"""Non-Markovian dephasing of a charge qubit coupled to two resonators."""

from .errors import (
    ConfigError,
    CQEDError,
    DegeneracyPoint,
    NoSignChange,
    NonConvergence,
    NonzeroMixingAngle,
    StepTooLarge,
    TruncationTooSmall,
)
from .model import EffectiveParams, ModePrep, PrepKind, SimGrid, validate_and_normalize

__all__ = [
    "CQEDError",
    "ConfigError",
    "DegeneracyPoint",
    "NoSignChange",
    "NonConvergence",
    "NonzeroMixingAngle",
    "StepTooLarge",
    "TruncationTooSmall",
    "EffectiveParams",
    "ModePrep",
    "PrepKind",
    "SimGrid",
    "validate_and_normalize",
]
