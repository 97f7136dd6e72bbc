"""Exception hierarchy for ShearLab.

Report-style checks never raise for a failed property; they carry flags.
These exceptions signal inputs or numerical states the library cannot
continue from.
"""

from __future__ import annotations


class ShearLabError(Exception):
    """Base class for all ShearLab errors."""


class InvalidInputError(ShearLabError, ValueError):
    """Rejected input: wrong shape, out-of-range parameter, bad tag."""


class DegenerateSymbolError(ShearLabError, ValueError):
    """An inverse symbol was applied to content it cannot invert."""


class ProfileDegeneracyError(ShearLabError, ValueError):
    """The shear profile stopped being strictly monotone."""


class NeumannDivergenceError(ShearLabError, RuntimeError):
    """The Neumann series contraction estimate reached 1."""

    def __init__(self, gamma: float, message: str = ""):
        self.gamma = gamma
        super().__init__(message or f"Neumann series diverges: contraction ratio {gamma:.4g} >= 1")


class ResolutionError(ShearLabError, RuntimeError):
    """A discrete system turned singular or produced non-finite values."""


class RegimeMismatchError(ShearLabError, ValueError):
    """A multiplier was evaluated outside the time regime it was tagged with."""
