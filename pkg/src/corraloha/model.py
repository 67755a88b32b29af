"""Domain types for correlated slotted-Aloha networks.

All stochastic helpers take an explicit integer seed and draw from
``numpy.random.default_rng(seed)`` (the PCG64 bit generator), so results are
reproducible across runs and platforms for a given numpy release.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ModelError, OutOfRangeEntry


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _check_unit_interval(a: np.ndarray, what: str) -> None:
    bad = ~((a >= 0.0) & (a <= 1.0))
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        if len(idx) == 1:
            idx = idx[0]
        raise OutOfRangeEntry(idx, float(a[idx]), what)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Square matrix C; ``entries[j, i]`` is the probability that sensor j's
    update also carries sensor i's current state. No symmetry is assumed."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.entries, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] == 0:
            raise DimensionMismatch(f"correlation matrix must be square and non-empty, got shape {c.shape}")
        _check_unit_interval(c, "correlation entry")
        object.__setattr__(self, "entries", _frozen(c))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, n: int) -> CorrelationMatrix:
        return cls(np.eye(n))

    @classmethod
    def constant(cls, n: int, offdiag: float, diag: float = 1.0) -> CorrelationMatrix:
        c = np.full((n, n), float(offdiag))
        np.fill_diagonal(c, diag)
        return cls(c)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CorrelationMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def save(self, path: str | os.PathLike) -> None:
        save_matrix(self, path)


@dataclass(frozen=True)
class PowerProfile:
    """Per-slot energy draw while transmitting / idle, and the battery budget."""

    transmit_power: float = 100.0
    idle_power: float = 1.0
    budget: float = 1e6

    def __post_init__(self) -> None:
        if not self.idle_power > 0:
            raise ModelError(f"idle_power must be > 0, got {self.idle_power}")
        if not self.transmit_power >= self.idle_power:
            raise ModelError(
                f"transmit_power ({self.transmit_power}) must be >= idle_power ({self.idle_power})"
            )
        if not self.budget > 0:
            raise ModelError(f"budget must be > 0, got {self.budget}")


@dataclass(frozen=True)
class NetworkModel:
    correlation: CorrelationMatrix
    aoi_cap: int = 20
    power: PowerProfile = field(default_factory=PowerProfile)

    def __post_init__(self) -> None:
        if int(self.aoi_cap) != self.aoi_cap or self.aoi_cap < 1:
            raise ModelError(f"aoi_cap must be a positive integer, got {self.aoi_cap}")
        object.__setattr__(self, "aoi_cap", int(self.aoi_cap))

    @property
    def n(self) -> int:
        return self.correlation.n

    @property
    def C(self) -> np.ndarray:
        return self.correlation.entries

    @classmethod
    def build(
        cls,
        correlation,
        aoi_cap: int = 20,
        transmit_power: float = 100.0,
        idle_power: float = 1.0,
        budget: float = 1e6,
    ) -> NetworkModel:
        if not isinstance(correlation, CorrelationMatrix):
            correlation = CorrelationMatrix(np.asarray(correlation, dtype=float))
        return cls(correlation, aoi_cap, PowerProfile(transmit_power, idle_power, budget))

    def with_correlation(self, correlation: CorrelationMatrix) -> NetworkModel:
        return NetworkModel(correlation, self.aoi_cap, self.power)


@dataclass(frozen=True, eq=False)
class Policy:
    """Per-sensor transmission probabilities."""

    q: np.ndarray

    def __post_init__(self) -> None:
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if q.ndim != 1:
            raise DimensionMismatch(f"policy must be a vector, got shape {q.shape}")
        _check_unit_interval(q, "transmission probability")
        object.__setattr__(self, "q", _frozen(q))

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @classmethod
    def homogeneous(cls, n: int, q: float) -> Policy:
        return cls(np.full(n, float(q)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Policy):
            return NotImplemented
        return np.array_equal(self.q, other.q)

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class ObjectiveWeights:
    """Weights of J = gamma1 * AoI - gamma2 * energy efficiency."""

    gamma1: float = 0.1
    gamma2: float = 1.0

    def __post_init__(self) -> None:
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ModelError("objective weights must be non-negative")
        if self.gamma1 == 0 and self.gamma2 == 0:
            raise ModelError("objective weights must not both be zero")


def as_array(policy) -> np.ndarray:
    """Transmission-probability vector of a Policy or any array-like."""
    if isinstance(policy, Policy):
        return policy.q
    return np.atleast_1d(np.asarray(policy, dtype=float))


def as_matrix(correlation) -> np.ndarray:
    if isinstance(correlation, NetworkModel):
        return correlation.C
    if isinstance(correlation, CorrelationMatrix):
        return correlation.entries
    return np.asarray(correlation, dtype=float)


def validate(model: NetworkModel, policy: Policy | None = None) -> None:
    """Re-check every invariant of ``model`` (and ``policy``) and that their
    dimensions agree. Raises DimensionMismatch or OutOfRangeEntry."""
    c = model.C
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DimensionMismatch(f"correlation matrix is not square: {c.shape}")
    _check_unit_interval(c, "correlation entry")
    PowerProfile.__post_init__(model.power)
    if model.aoi_cap < 1:
        raise ModelError("aoi_cap must be >= 1")
    if policy is None:
        return
    q = as_array(policy)
    if q.ndim != 1 or q.shape[0] != model.n:
        raise DimensionMismatch(f"policy has length {q.shape[0]}, model has n={model.n}")
    _check_unit_interval(q, "transmission probability")


def generate_correlation(
    n: int,
    diag: float = 1.0,
    offdiag_range: tuple[float, float] = (0.0, 0.3),
    density: float = 1.0,
    seed: int = 0,
) -> CorrelationMatrix:
    """Random correlation matrix with constant diagonal.

    Each off-diagonal entry is independently non-zero with probability
    ``density``; non-zero entries are uniform on ``offdiag_range``.
    """
    lo, hi = (float(x) for x in offdiag_range)
    if not (0.0 <= lo <= hi <= 1.0):
        raise ModelError(f"invalid off-diagonal range [{lo}, {hi}]")
    if not 0.0 <= diag <= 1.0:
        raise ModelError(f"diag must lie in [0, 1], got {diag}")
    if not 0.0 <= density <= 1.0:
        raise ModelError(f"density must lie in [0, 1], got {density}")
    if n < 1:
        raise ModelError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    # both draws always happen so the value stream does not depend on density
    keep = rng.random((n, n)) < density
    values = lo + (hi - lo) * rng.random((n, n))
    c = np.where(keep, values, 0.0)
    np.fill_diagonal(c, diag)
    return CorrelationMatrix(c)


def save_matrix(correlation: CorrelationMatrix, path: str | os.PathLike) -> None:
    """Write rows of space-separated decimals (round-trip exact)."""
    np.savetxt(path, as_matrix(correlation), fmt="%.17g", delimiter=" ")


def load_matrix(path: str | os.PathLike) -> CorrelationMatrix:
    c = np.loadtxt(path, dtype=float, ndmin=2)
    return CorrelationMatrix(c)
