"""Optimal common transmission probability for homogeneous networks.

The closed-form optima use the large-n approximation (1-q)^(n-1) ~ exp(-nq);
every metric reported for them is re-evaluated with the exact expressions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import mean_aoi
from .errors import EmptyInterval, ModelError
from .model import NetworkModel, ObjectiveWeights

DEFAULT_STEP = 1e-4
SMALL_N = 10


@dataclass(frozen=True)
class HomogeneousSolution:
    q_star: float
    aoi_at_q: float
    ee_at_q: float
    objective_at_q: float
    kind: str  # "age_optimal" | "energy_optimal" | "pareto"
    grid_q: float | None = None
    candidates: int = 0
    flags: tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True, eq=False)
class Sweep:
    q: np.ndarray
    aoi: np.ndarray
    ee: np.ndarray
    objective: np.ndarray


def sweep(model: NetworkModel, qs, weights: ObjectiveWeights | None = None) -> Sweep:
    """Exact network AoI, EE and J for the all-q policy at every q in ``qs``.

    With q_i = q for all i the success probability is (1-q)^(n-1) for every
    sensor, so p_i^r = q (1-q)^(n-1) sum_j c_ji and the sweep vectorises.
    """
    w = weights or ObjectiveWeights()
    q = np.atleast_1d(np.asarray(qs, dtype=float))
    n = model.n
    col = model.C.sum(axis=0)
    with np.errstate(divide="ignore"):
        p = np.exp((n - 1) * np.log1p(-q)) if n > 1 else np.ones_like(q)
    p = np.where(np.isnan(p), 0.0, p)
    pr = (q * p)[:, None] * col[None, :]
    aoi = np.sum(mean_aoi(pr, model.aoi_cap), axis=1)
    pw = model.power
    den = pw.idle_power + q * (pw.transmit_power - pw.idle_power)
    ee = pr.sum(axis=1) / den
    return Sweep(q, aoi, ee, w.gamma1 * aoi - w.gamma2 * ee)


def _at(model: NetworkModel, q: float, weights: ObjectiveWeights) -> tuple[float, float, float]:
    s = sweep(model, [q], weights)
    return float(s.aoi[0]), float(s.ee[0]), float(s.objective[0])


def grid(lo: float, hi: float, step: float) -> np.ndarray:
    """lo, lo + step, ... up to hi (inclusive within rounding)."""
    if hi < lo:
        raise EmptyInterval(f"empty interval [{lo}, {hi}]")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def age_optimal_q(n: int) -> float:
    return 1.0 / n


def energy_optimal_q(n: int, transmit_power: float, idle_power: float) -> tuple[float, bool]:
    """Closed-form EE-optimal q and whether the P_T == P_I limit was taken."""
    if idle_power <= 0 or transmit_power < idle_power:
        raise ModelError("energy-optimal q needs P_T >= P_I > 0")
    a = transmit_power / idle_power - 1.0
    if a < 1e-12:
        return 1.0 / n, True
    return (math.sqrt(1.0 + 4.0 / n * a) - 1.0) / (2.0 * a), False


def grid_argmin(model: NetworkModel, weights: ObjectiveWeights | None = None, step: float = DEFAULT_STEP,
                lo: float = 0.0, hi: float = 1.0, what: str = "objective") -> tuple[float, Sweep]:
    """Exact grid minimiser of ``what`` ('objective', 'aoi') or maximiser ('ee')."""
    s = sweep(model, grid(lo, hi, step), weights)
    if what == "objective":
        k = int(np.argmin(s.objective))
    elif what == "aoi":
        k = int(np.argmin(s.aoi))
    elif what == "ee":
        k = int(np.argmax(s.ee))
    else:
        raise ValueError(what)
    return float(s.q[k]), s


def age_optimal(model: NetworkModel, weights: ObjectiveWeights | None = None,
                step: float = DEFAULT_STEP) -> HomogeneousSolution:
    w = weights or ObjectiveWeights()
    q = age_optimal_q(model.n)
    flags: list[str] = []
    grid_q = None
    if model.n < SMALL_N:
        grid_q, _ = grid_argmin(model, w, step, what="aoi")
        if abs(grid_q - q) > step:
            flags.append(f"exact grid argmin {grid_q:.6g} differs from 1/n")
    aoi, ee, j = _at(model, q, w)
    return HomogeneousSolution(q, aoi, ee, j, "age_optimal", grid_q, 0, tuple(flags))


def energy_optimal(model: NetworkModel, weights: ObjectiveWeights | None = None,
                   step: float = DEFAULT_STEP) -> HomogeneousSolution:
    """Closed-form EE optimum; the exact grid argmax is reported alongside."""
    w = weights or ObjectiveWeights()
    pw = model.power
    q, limit = energy_optimal_q(model.n, pw.transmit_power, pw.idle_power)
    flags = ["P_T == P_I: limit q = 1/n"] if limit else []
    grid_q, _ = grid_argmax_ee(model, step)
    aoi, ee, j = _at(model, q, w)
    return HomogeneousSolution(q, aoi, ee, j, "energy_optimal", grid_q, 0, tuple(flags))


def grid_argmax_ee(model: NetworkModel, step: float = DEFAULT_STEP) -> tuple[float, Sweep]:
    return grid_argmin(model, ObjectiveWeights(), step, what="ee")


def pareto_search(model: NetworkModel, weights: ObjectiveWeights | None = None,
                  step: float = DEFAULT_STEP) -> HomogeneousSolution:
    """Bounded exhaustive search of J over [q_E*, q_A*] with spacing ``step``.

    Ties go to the smaller q (first candidate wins on equal J).
    """
    w = weights or ObjectiveWeights()
    pw = model.power
    q_e, limit = energy_optimal_q(model.n, pw.transmit_power, pw.idle_power)
    q_a = age_optimal_q(model.n)
    if q_e > q_a + 1e-15:
        raise EmptyInterval(f"q_E*={q_e} > q_A*={q_a}")
    if not step > 0:
        raise ModelError("search step must be positive")
    cand = grid(q_e, max(q_a, q_e), step)
    s = sweep(model, cand, w)
    best = None
    best_j = math.inf
    for k in range(cand.shape[0]):
        if s.objective[k] < best_j:
            best, best_j = k, s.objective[k]
    flags = ("P_T == P_I: single-point interval",) if limit else ()
    return HomogeneousSolution(
        float(cand[best]), float(s.aoi[best]), float(s.ee[best]), float(best_j),
        "pareto", None, int(cand.shape[0]), flags,
    )
