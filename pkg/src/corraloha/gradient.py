"""Analytic gradients of network AoI, energy efficiency and the objective
with respect to the policy vector, plus a central-difference oracle."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analytic import reset_probs
from .errors import DegenerateEnergy, DegenerateReset, PolicyAtBoundary, StepOutOfRange
from .model import NetworkModel, ObjectiveWeights, as_array, as_matrix

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-12
#: below this reset probability d(mean AoI)/dp uses its Taylor expansion
SERIES_SWITCH = 1e-7


def leave_two_out_products(q: np.ndarray) -> np.ndarray:
    """L[j, s] = prod_{k not in {j, s}} (1 - q_k); L[j, j] = p_j."""
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    f = np.broadcast_to(1.0 - q, (n, n, n)).copy()
    idx = np.arange(n)
    f[idx, :, idx] = 1.0  # drop k == j
    f[:, idx, idx] = 1.0  # drop k == s
    return f.prod(axis=2)


def d_reset_probs(policy, correlation) -> np.ndarray:
    """Jacobian D[i, s] = d p_i^r / d q_s.

    D[i, s] = p_s c_si - sum_{j != s} q_j c_ji prod_{k != j, s}(1 - q_k),
    i.e. the leave-two-out form of ``p_s c_si - sum_{j!=s} q_j p_j c_ji / (1 - q_s)``.
    """
    q = as_array(policy)
    c = as_matrix(correlation)
    if np.any(q >= 1.0 - BOUNDARY_TOL):
        raise PolicyAtBoundary(f"transmission probability too close to 1: max q = {float(q.max())!r} (sensor {int(q.argmax())})")
    L = leave_two_out_products(q)
    p = np.diag(L).copy()
    # W[j, s] = q_j prod_{k != j,s}(1-q_k), zero on the diagonal
    W = q[:, None] * L
    np.fill_diagonal(W, 0.0)
    return (p[:, None] * c).T - c.T @ W


def d_mean_aoi_d_reset(p_r, aoi_cap: int) -> np.ndarray:
    """Derivative of (1 - (1-p)^D)/p with respect to p."""
    p = np.asarray(p_r, dtype=float)
    D = float(aoi_cap)
    if aoi_cap == 1:  # AoI is identically 1
        return np.zeros_like(p)
    small = p < SERIES_SWITCH
    safe = np.where(small, 1.0, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = D * np.exp((D - 1.0) * np.log1p(-safe)) / safe
        b = -np.expm1(D * np.log1p(-safe)) / safe**2
    exact = a - b
    # -C(D,2) + 2 C(D,3) p - 3 C(D,4) p^2
    c2 = D * (D - 1) / 2
    c3 = c2 * (D - 2) / 3
    c4 = c3 * (D - 3) / 4
    series = -c2 + 2 * c3 * p - 3 * c4 * p**2
    return np.where(small, series, exact)


def d_network_aoi(policy, model: NetworkModel, jac: np.ndarray | None = None, zero_reset: str = "raise") -> np.ndarray:
    """Gradient of the network AoI.

    ``zero_reset`` controls sensors whose reset probability is exactly zero:
    ``"raise"`` raises DegenerateReset, ``"zero"`` drops their contribution.
    """
    q = as_array(policy)
    pr = reset_probs(q, model.C)
    if jac is None:
        jac = d_reset_probs(q, model.C)
    dead = pr <= 0.0
    if dead.any():
        if zero_reset == "raise":
            raise DegenerateReset(f"zero reset probability for sensors {np.flatnonzero(dead).tolist()}")
        logger.debug("zero reset probability for sensors %s; contribution set to 0", np.flatnonzero(dead).tolist())
    dA = np.where(dead, 0.0, d_mean_aoi_d_reset(pr, model.aoi_cap))
    return dA @ jac


def d_energy_eff(policy, model: NetworkModel, jac: np.ndarray | None = None) -> np.ndarray:
    """Gradient of the network energy efficiency sum_i p_i^r / (P_I + q_i (P_T - P_I))."""
    q = as_array(policy)
    pw = model.power
    slope = pw.transmit_power - pw.idle_power
    den = pw.idle_power + q * slope
    if np.any(den <= 0):
        raise DegenerateEnergy("zero per-slot power draw")
    if jac is None:
        jac = d_reset_probs(q, model.C)
    pr = reset_probs(q, model.C)
    # i != s: only the numerator moves; i == s: quotient rule adds -p_s^r a / den_s^2
    return (1.0 / den) @ jac - pr * slope / den**2


def d_objective(
    policy,
    model: NetworkModel,
    weights: ObjectiveWeights | None = None,
    zero_reset: str = "raise",
) -> np.ndarray:
    w = weights or ObjectiveWeights()
    q = as_array(policy)
    jac = d_reset_probs(q, model.C)
    g = np.zeros(q.shape[0])
    if w.gamma1:
        g += w.gamma1 * d_network_aoi(q, model, jac=jac, zero_reset=zero_reset)
    if w.gamma2:
        g -= w.gamma2 * d_energy_eff(q, model, jac=jac)
    return g


@dataclass(frozen=True, eq=False)
class GradientReport:
    d_reset: np.ndarray
    d_aoi: np.ndarray
    d_ee: np.ndarray
    d_objective: np.ndarray


def gradient_report(policy, model: NetworkModel, weights: ObjectiveWeights | None = None) -> GradientReport:
    w = weights or ObjectiveWeights()
    q = as_array(policy)
    jac = d_reset_probs(q, model.C)
    d_aoi = d_network_aoi(q, model, jac=jac)
    d_ee = d_energy_eff(q, model, jac=jac)
    return GradientReport(jac, d_aoi, d_ee, w.gamma1 * d_aoi - w.gamma2 * d_ee)


def finite_diff(fn: Callable[[np.ndarray], float], policy, h: float = 1e-6) -> np.ndarray:
    """Central differences (f(q + h e_s) - f(q - h e_s)) / 2h.

    Every evaluation must stay inside [0, 1]; no clamping is done.
    """
    q = np.array(as_array(policy), dtype=float)
    if not h > 0 or np.any(q - h < 0.0) or np.any(q + h > 1.0):
        raise StepOutOfRange(f"step h={h} leaves [0, 1] around the policy")
    g = np.empty_like(q)
    for s in range(q.shape[0]):
        up = q.copy()
        dn = q.copy()
        up[s] += h
        dn[s] -= h
        g[s] = (fn(up) - fn(dn)) / (2 * h)
    return g


def finite_diff_jacobian(fn: Callable[[np.ndarray], np.ndarray], policy, h: float = 1e-6) -> np.ndarray:
    """Column s holds the central difference of a vector field along q_s."""
    q = np.array(as_array(policy), dtype=float)
    if not h > 0 or np.any(q - h < 0.0) or np.any(q + h > 1.0):
        raise StepOutOfRange(f"step h={h} leaves [0, 1] around the policy")
    cols = []
    for s in range(q.shape[0]):
        up = q.copy()
        dn = q.copy()
        up[s] += h
        dn[s] -= h
        cols.append((np.asarray(fn(up)) - np.asarray(fn(dn))) / (2 * h))
    return np.stack(cols, axis=1)

