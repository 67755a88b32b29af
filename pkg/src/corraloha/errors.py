"""Exception types raised across the package."""

from __future__ import annotations


class ModelError(ValueError):
    """Base class for invalid inputs and degenerate evaluations."""


class DimensionMismatch(ModelError):
    pass


class OutOfRangeEntry(ModelError):
    def __init__(self, index, value, what: str = "entry") -> None:
        self.index = index
        self.value = value
        super().__init__(f"{what} at index {index} out of range: {value!r}")


class DegenerateChain(ModelError):
    """Reset probability is zero, so the AoI chain never leaves the cap."""


class DegenerateEnergy(ModelError):
    """Per-slot power draw is zero for some sensor."""


class DegenerateReset(ModelError):
    """A reset probability is zero where a derivative in 1/p_r is needed."""


class PolicyAtBoundary(ModelError):
    pass


class StepOutOfRange(ModelError):
    pass


class EmptyInterval(ModelError):
    pass


class NonFiniteGradient(ArithmeticError):
    pass


class AllStartsFailed(RuntimeError):
    pass


class ConfigError(ValueError):
    """Experiment configuration could not be parsed or validated."""
