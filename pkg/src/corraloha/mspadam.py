"""Multi-start projected AMSGrad optimisation of heterogeneous policies,
plus the benchmark strategies it is compared against."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import homogeneous
from .analytic import MetricsReport, evaluate, objective
from .errors import AllStartsFailed, ModelError, NonFiniteGradient
from .gradient import d_objective
from .model import NetworkModel, ObjectiveWeights, Policy

logger = logging.getLogger(__name__)

BASELINES = ("random", "homogeneous_age", "homogeneous_ee", "homogeneous_pareto")


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.005
    tolerance: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    delta: float = 1e-8
    starts: int = 10
    min_start_distance: float = 1.0
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    max_iters: int = 100_000
    seed: int = 0
    round_threshold: float = 1e-3
    sample_retries: int = 1000
    threads: int = 1
    record_trajectory: bool = False

    def __post_init__(self) -> None:
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ModelError("beta1 and beta2 must lie in (0, 1)")
        if not (self.learning_rate > 0 and self.tolerance > 0 and self.delta > 0):
            raise ModelError("learning_rate, tolerance and delta must be positive")
        if self.delta >= 0.5:
            raise ModelError("delta must be tiny")
        if self.starts < 1 or self.min_start_distance < 0 or self.max_iters < 1:
            raise ModelError("starts >= 1, min_start_distance >= 0, max_iters >= 1 required")


@dataclass(frozen=True, eq=False)
class OptimizerState:
    q: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def fresh(cls, q0) -> OptimizerState:
        q0 = np.array(q0, dtype=float)
        return cls(q0, np.zeros_like(q0), np.zeros_like(q0), 0)


@dataclass(eq=False)
class StartResult:
    index: int
    q0: np.ndarray
    q: np.ndarray
    objective: float
    initial_objective: float
    iterations: int
    converged: bool
    failed: bool = False
    error: str = ""
    last_step: float = math.nan
    # rows of (iteration, J, ||q_t - q_{t-1}||) when recorded
    trajectory: list[tuple[int, float, float]] = field(default_factory=list)
    v_monotone: bool = True


@dataclass(eq=False)
class OptimizationResult:
    q_star: Policy
    objective: float
    best_start: int
    starts: list[StartResult]
    unrounded_q: np.ndarray
    unrounded_objective: float
    effective_min_distance: float
    warnings: list[str] = field(default_factory=list)

    @property
    def converged(self) -> list[bool]:
        return [s.converged for s in self.starts]

    @property
    def iterations(self) -> list[int]:
        return [s.iterations for s in self.starts]


def sample_starts(n: int, cfg: OptimizerConfig) -> tuple[np.ndarray, float, list[str]]:
    """M dispersed starting points in [delta, 1 - delta]^n.

    Rejection sampling against a minimum pairwise distance; after
    ``cfg.sample_retries`` consecutive rejections the distance is halved.
    Returns (points, effective distance, warnings).
    """
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.delta, 1.0 - cfg.delta
    d = float(cfg.min_start_distance)
    pts: list[np.ndarray] = []
    warnings: list[str] = []
    misses = 0
    while len(pts) < cfg.starts:
        x = lo + (hi - lo) * rng.random(n)
        if all(np.linalg.norm(x - y) >= d for y in pts):
            pts.append(x)
            misses = 0
            continue
        misses += 1
        if misses >= cfg.sample_retries:
            msg = f"could not place {cfg.starts} starts at distance {d:g} in n={n}; halving to {d / 2:g}"
            logger.warning(msg)
            warnings.append(msg)
            d /= 2
            misses = 0
    return np.array(pts), d, warnings


def adam_step(state: OptimizerState, gradient, cfg: OptimizerConfig) -> OptimizerState:
    """One AMSGrad-style moment update, descent step and box projection."""
    g = np.asarray(gradient, dtype=float)
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient(f"non-finite gradient at iteration {state.t + 1}")
    t = state.t + 1
    b1, b2 = cfg.beta1, cfg.beta2
    m = b1 * state.m + (1 - b1) * g
    v = np.maximum(state.v, b2 * state.v + (1 - b2) * g * g)
    m_hat = m / (1 - b1**t)
    v_hat = v / (1 - b2**t)
    q_tilde = state.q - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.delta)
    q = np.minimum(1 - cfg.delta, np.maximum(cfg.delta, q_tilde))
    return OptimizerState(q, m, v, t)


def _gradient(model: NetworkModel, weights: ObjectiveWeights):
    def grad(q):
        return d_objective(q, model, weights, zero_reset="zero")
    return grad


def _descend(model: NetworkModel, q0: np.ndarray, cfg: OptimizerConfig, index: int, step_fn) -> StartResult:
    w = cfg.weights
    grad = _gradient(model, w)
    state = OptimizerState.fresh(np.clip(q0, cfg.delta, 1 - cfg.delta))
    j0 = objective(state.q, model, w)
    res = StartResult(index, np.array(q0), state.q, math.nan, j0, 0, False)
    try:
        for _ in range(cfg.max_iters):
            prev = state
            with np.errstate(all="ignore"):
                g = grad(prev.q)
            state = step_fn(prev, g, cfg)
            if np.any(state.v < prev.v):
                res.v_monotone = False
            moved = float(np.linalg.norm(state.q - prev.q))
            res.last_step = moved
            if cfg.record_trajectory:
                res.trajectory.append((state.t, objective(state.q, model, w), moved))
            if moved <= cfg.tolerance:
                res.converged = True
                break
    except (NonFiniteGradient, FloatingPointError, ArithmeticError) as exc:
        logger.warning("start %d aborted: %s", index, exc)
        res.failed = True
        res.error = str(exc)
    res.q = state.q
    res.iterations = state.t
    if not res.failed:
        jf = objective(state.q, model, w)
        if not math.isfinite(jf):
            res.failed = True
            res.error = "non-finite objective"
        res.objective = jf
    return res


def round_small(q: np.ndarray, model: NetworkModel, weights: ObjectiveWeights,
                threshold: float) -> tuple[np.ndarray, float]:
    """Zero coordinates below ``threshold`` whenever J does not get worse.

    All small coordinates are tried at once first, then one at a time.
    """
    q = np.array(q, dtype=float)
    best = objective(q, model, weights)
    small = np.flatnonzero(q < threshold)
    if small.size == 0:
        return q, best
    trial = q.copy()
    trial[small] = 0.0
    jt = objective(trial, model, weights)
    if jt <= best:
        return trial, jt
    for i in small:
        trial = q.copy()
        trial[i] = 0.0
        jt = objective(trial, model, weights)
        if jt <= best:
            q, best = trial, jt
    return q, best


def _run_starts(model: NetworkModel, cfg: OptimizerConfig, step_fn, starts: np.ndarray) -> list[StartResult]:
    jobs = list(enumerate(starts))
    if cfg.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(lambda a: _descend(model, a[1], cfg, a[0], step_fn), jobs))
    return [_descend(model, q0, cfg, k, step_fn) for k, q0 in jobs]


def _select(model: NetworkModel, cfg: OptimizerConfig, results: list[StartResult], dmin: float,
            warnings: list[str]) -> OptimizationResult:
    ok = [r for r in results if not r.failed]
    if not ok:
        raise AllStartsFailed("every start produced non-finite values")
    best = min(ok, key=lambda r: (r.objective, r.index))
    q_round, j_round = round_small(best.q, model, cfg.weights, cfg.round_threshold)
    return OptimizationResult(
        q_star=Policy(q_round),
        objective=j_round,
        best_start=best.index,
        starts=results,
        unrounded_q=best.q,
        unrounded_objective=best.objective,
        effective_min_distance=dmin,
        warnings=warnings,
    )


def optimize(model: NetworkModel, cfg: OptimizerConfig | None = None) -> OptimizationResult:
    """Minimise gamma1 * AoI - gamma2 * EE over heterogeneous policies."""
    cfg = cfg or OptimizerConfig()
    starts, dmin, warnings = sample_starts(model.n, cfg)
    results = _run_starts(model, cfg, adam_step, starts)
    for r in results:
        logger.info("start %d: J=%.6g after %d iterations (converged=%s)", r.index, r.objective, r.iterations, r.converged)
    return _select(model, cfg, results, dmin, warnings)


def projected_gd(model: NetworkModel, cfg: OptimizerConfig | None = None, step: float = 1e-4) -> OptimizationResult:
    """Plain projected gradient descent from the same starts, for comparison."""
    cfg = cfg or OptimizerConfig()

    def gd_step(state: OptimizerState, g, c: OptimizerConfig) -> OptimizerState:
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient at iteration {state.t + 1}")
        q = np.clip(state.q - step * g, c.delta, 1 - c.delta)
        return OptimizerState(q, state.m, state.v, state.t + 1)

    starts, dmin, warnings = sample_starts(model.n, cfg)
    return _select(model, cfg, _run_starts(model, cfg, gd_step, starts), dmin, warnings)


def baseline(model: NetworkModel, kind: str, seed: int = 0,
             weights: ObjectiveWeights | None = None) -> tuple[Policy, MetricsReport]:
    """Benchmark strategy: seeded uniform-random q, or a broadcast homogeneous optimum."""
    w = weights or ObjectiveWeights()
    n = model.n
    if kind == "random":
        q = np.random.default_rng(seed).random(n)
    elif kind == "homogeneous_age":
        q = np.full(n, homogeneous.age_optimal_q(n))
    elif kind == "homogeneous_ee":
        pw = model.power
        q = np.full(n, homogeneous.energy_optimal_q(n, pw.transmit_power, pw.idle_power)[0])
    elif kind == "homogeneous_pareto":
        q = np.full(n, homogeneous.pareto_search(model, w).q_star)
    else:
        raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINES}")
    policy = Policy(q)
    return policy, evaluate(policy, model, w)


def contention_reduction(policy, threshold: float = 1e-3) -> float:
    """Fraction of sensors whose transmission probability is below ``threshold``."""
    if not 0 < threshold < 1:
        raise ModelError("threshold must lie in (0, 1)")
    q = policy.q if isinstance(policy, Policy) else np.asarray(policy, dtype=float)
    return float(np.mean(q < threshold))


def with_seed(cfg: OptimizerConfig, seed: int) -> OptimizerConfig:
    return replace(cfg, seed=seed)
