"""Closed-form AoI and energy-efficiency metrics.

Everything here evaluates the exact product-form expressions; the
large-n exponential approximations live only in :mod:`corraloha.homogeneous`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChain, DegenerateEnergy, ModelError
from .model import NetworkModel, ObjectiveWeights, as_array, as_matrix

#: below this reset probability mean_aoi returns its p_r -> 0 limit
ZERO_RESET = 1e-12


def leave_one_out_products(x: np.ndarray) -> np.ndarray:
    """out[i] = prod_{k != i} x[k], computed without division."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n == 0:
        return x.copy()
    ones = np.ones(x.shape[:-1] + (1,))
    prefix = np.cumprod(np.concatenate([ones, x[..., :-1]], axis=-1), axis=-1)
    suffix = np.cumprod(np.concatenate([ones, x[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return prefix * suffix


def success_probs(policy) -> np.ndarray:
    """p_i: probability that no other sensor transmits in a slot."""
    q = as_array(policy)
    return leave_one_out_products(1.0 - q)


def reset_probs(policy, correlation) -> np.ndarray:
    """p_i^r = sum_j p_j q_j c_ji."""
    q = as_array(policy)
    c = as_matrix(correlation)
    return (success_probs(q) * q) @ c


def _pow1m(p, k):
    """(1 - p)**k without cancellation for small p."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(k * np.log1p(-p))
    # 0 * log(0) is nan, but (1 - 1)^0 = 1
    return np.where(np.asarray(k) == 0, 1.0, out)


def steady_state(p_r: float, aoi_cap: int) -> np.ndarray:
    """Stationary AoI distribution; entry k-1 is the probability of AoI = k."""
    if not 0.0 < p_r <= 1.0:
        if p_r == 0.0:
            raise DegenerateChain("reset probability is zero; all mass sits at the cap")
        raise ModelError(f"reset probability must lie in (0, 1], got {p_r}")
    if aoi_cap < 1:
        raise ModelError("aoi_cap must be >= 1")
    k = np.arange(aoi_cap, dtype=float)
    surv = _pow1m(p_r, k)  # (1-p)^(k-1) for AoI value k
    probs = surv * p_r
    probs[-1] = surv[-1]
    return probs


def mean_aoi(p_r, aoi_cap: int):
    """Long-term average AoI (1 - (1-p_r)^cap) / p_r; the cap at p_r -> 0."""
    p = np.asarray(p_r, dtype=float)
    small = p < ZERO_RESET
    safe = np.where(small, 1.0, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = -np.expm1(aoi_cap * np.log1p(-safe)) / safe
    out = np.where(small, float(aoi_cap), val)
    return float(out) if out.ndim == 0 else out


def sensor_aoi(policy, model: NetworkModel) -> np.ndarray:
    return mean_aoi(reset_probs(policy, model.C), model.aoi_cap)


def network_aoi(policy, model: NetworkModel) -> float:
    return float(np.sum(sensor_aoi(policy, model)))


def _power_draw(q: np.ndarray, model: NetworkModel) -> np.ndarray:
    pw = model.power
    den = pw.idle_power + q * (pw.transmit_power - pw.idle_power)
    if np.any(den <= 0):
        raise DegenerateEnergy("zero per-slot power draw")
    return den


def sensor_energy_efficiency(policy, model: NetworkModel) -> np.ndarray:
    """xi_i = p_i^r / (P_I + q_i (P_T - P_I)), delivered updates per energy unit."""
    q = as_array(policy)
    return reset_probs(q, model.C) / _power_draw(q, model)


def lifetime_throughput(policy, model: NetworkModel) -> np.ndarray:
    return model.power.budget * sensor_energy_efficiency(policy, model)


def energy_efficiency(policy, model: NetworkModel) -> tuple[np.ndarray, float]:
    xi = sensor_energy_efficiency(policy, model)
    return xi, float(np.sum(xi))


def objective(policy, model: NetworkModel, weights: ObjectiveWeights | None = None) -> float:
    """J = gamma1 * network AoI - gamma2 * network energy efficiency."""
    w = weights or ObjectiveWeights()
    q = as_array(policy)
    pr = reset_probs(q, model.C)
    aoi = float(np.sum(mean_aoi(pr, model.aoi_cap)))
    ee = float(np.sum(pr / _power_draw(q, model)))
    return w.gamma1 * aoi - w.gamma2 * ee


@dataclass(frozen=True, eq=False)
class MetricsReport:
    q: np.ndarray
    success_probs: np.ndarray
    reset_probs: np.ndarray
    sensor_aoi: np.ndarray
    network_aoi: float
    lifetime_throughput: np.ndarray
    sensor_ee: np.ndarray
    network_ee: float
    objective: float
    weights: ObjectiveWeights

    CSV_FIELDS = ("sensor", "q", "success_prob", "reset_prob", "aoi", "lifetime_throughput", "energy_efficiency", "objective")

    @property
    def network_throughput(self) -> float:
        return float(np.sum(self.lifetime_throughput))

    def csv_rows(self) -> list[list]:
        rows = []
        for i in range(len(self.q)):
            rows.append([
                i, self.q[i], self.success_probs[i], self.reset_probs[i],
                self.sensor_aoi[i], self.lifetime_throughput[i], self.sensor_ee[i], "",
            ])
        rows.append([
            "network", float(np.sum(self.q)), "", float(np.sum(self.reset_probs)),
            self.network_aoi, self.network_throughput, self.network_ee, self.objective,
        ])
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_FIELDS)
        for row in self.csv_rows():
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [
            f"sensors            {len(self.q)}",
            f"network AoI        {self.network_aoi:.6g} slots",
            f"network EE         {self.network_ee:.6g} packets/energy",
            f"lifetime thpt      {self.network_throughput:.6g} packets",
            f"objective J        {self.objective:.6g}"
            f"  (gamma1={self.weights.gamma1:g}, gamma2={self.weights.gamma2:g})",
            "",
            f"{'i':>4} {'q':>10} {'p':>10} {'p_r':>10} {'AoI':>10} {'EE':>12}",
        ]
        for i in range(len(self.q)):
            lines.append(
                f"{i:>4} {self.q[i]:>10.5g} {self.success_probs[i]:>10.5g} {self.reset_probs[i]:>10.5g}"
                f" {self.sensor_aoi[i]:>10.5g} {self.sensor_ee[i]:>12.5g}"
            )
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def evaluate(policy, model: NetworkModel, weights: ObjectiveWeights | None = None) -> MetricsReport:
    """All per-sensor and network metrics for one policy."""
    w = weights or ObjectiveWeights()
    q = np.array(as_array(policy), dtype=float)
    p = success_probs(q)
    pr = (p * q) @ model.C
    aoi = np.asarray(mean_aoi(pr, model.aoi_cap), dtype=float)
    xi = pr / _power_draw(q, model)
    net_aoi = float(np.sum(aoi))
    net_ee = float(np.sum(xi))
    return MetricsReport(
        q=q,
        success_probs=p,
        reset_probs=pr,
        sensor_aoi=aoi,
        network_aoi=net_aoi,
        lifetime_throughput=model.power.budget * xi,
        sensor_ee=xi,
        network_ee=net_ee,
        objective=w.gamma1 * net_aoi - w.gamma2 * net_ee,
        weights=w,
    )
