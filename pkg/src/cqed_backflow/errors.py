"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class CQEDError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(CQEDError, ValueError):
    """One or more configuration invariants were violated.

    ``issues`` holds ``(key, message)`` pairs, one per violated invariant.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        text = "; ".join(f"{key}: {msg}" for key, msg in self.issues)
        super().__init__(text or "invalid configuration")


class DegeneracyPoint(CQEDError, ValueError):
    """Gate charge sits exactly at the charge degeneracy point n_g = 1/2."""


class NonzeroMixingAngle(CQEDError, ValueError):
    """The qubit mixing angle is too large for the sigma_z-coupled model."""


class TruncationTooSmall(CQEDError, ValueError):
    """Fock truncation cannot hold the displaced states to the required tail."""


class StepTooLarge(CQEDError, ValueError):
    """Fixed integration step does not resolve the resonator period."""


class NonConvergence(CQEDError, RuntimeError):
    """An iterative refinement exhausted its budget without converging."""


class NoSignChange(CQEDError, ValueError):
    """A bisection bracket does not straddle the Markovian boundary."""
