"""Experiment runners behind the CLI: single-config commands and the built-in
figure/table reproductions. Every runner writes CSVs plus a manifest."""

from __future__ import annotations

import csv
import json
import logging
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import yaml

from . import __version__, homogeneous
from .analytic import evaluate, mean_aoi
from .config import ExperimentSpec
from .gradient import gradient_report
from .model import CorrelationMatrix, NetworkModel, ObjectiveWeights, Policy, generate_correlation
from .mspadam import BASELINES, OptimizationResult, OptimizerConfig, baseline, contention_reduction, optimize
from .simulator import SimConfig, replicate, simulate

logger = logging.getLogger(__name__)

FIG5_RANGES = {"C1": (0.0, 0.3), "C2": (0.3, 0.6), "C3": (0.6, 0.9)}
FIG8_LEVELS = (0.0, 0.2, 0.4, 0.6, 0.8)
FIG7_SIZES = (4, 8, 12, 16, 20)
STRATEGY_COLUMNS = ("mspadam",) + BASELINES


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def derive_seed(base: int, *keys: int) -> int:
    """Deterministic child seed of ``base`` for the integer path ``keys``."""
    ss = np.random.SeedSequence([int(base) & 0xFFFFFFFF, *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def pmap(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Map preserving input order; threads only change wall time."""
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def write_manifest(out: Path, command: str, spec: dict, seeds: dict, files: list[str]) -> None:
    manifest = {
        "tool": "corraloha",
        "version": __version__,
        "command": command,
        "argv": sys.argv[1:],
        "python": platform.python_version(),
        "numpy": np.__version__,
        "rng": "numpy.random.default_rng (PCG64)",
        "config": spec,
        "seeds": seeds,
        "files": sorted(files),
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")
    (out / "config.resolved.yaml").write_text(yaml.safe_dump(_plain(spec), sort_keys=True))


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o))


def _plain(o):
    return json.loads(json.dumps(o, default=_jsonable))


# -- single-config commands ----------------------------------------------------

def resolve_policy(spec: ExperimentSpec) -> tuple[Policy, OptimizationResult | None]:
    src = spec.policy_source
    if "q" in src:
        return Policy(np.asarray(src["q"], dtype=float)), None
    kind = src["strategy"]
    if kind == "mspadam":
        res = optimize(spec.model, spec.optimizer)
        return res.q_star, res
    return baseline(spec.model, kind, seed=spec.seed, weights=spec.weights)[0], None


def run_analytic(spec: ExperimentSpec, out: Path, dump_gradient: bool = False) -> list[str]:
    policy, _ = resolve_policy(spec)
    rep = evaluate(policy, spec.model, spec.weights)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(rep.to_csv())
    (out / "report.txt").write_text(rep.to_text())
    files = ["metrics.csv", "report.txt"]
    if dump_gradient:
        g = gradient_report(policy.q, spec.model, spec.weights)
        write_csv(out / "gradient.csv", ["sensor", "d_aoi", "d_ee", "d_objective"],
                  [[s, g.d_aoi[s], g.d_ee[s], g.d_objective[s]] for s in range(spec.model.n)])
        files.append("gradient.csv")
    return files


def run_simulate(spec: ExperimentSpec, out: Path, threads: int = 1, trace: bool = False) -> list[str]:
    policy, _ = resolve_policy(spec)
    sim = spec.simulation
    cfg = SimConfig(spec.model, policy, sim["horizon"], spec.seed, sim["warmup"])
    rep = replicate(cfg, sim["replications"], threads=threads)
    ana = evaluate(policy, spec.model, spec.weights)
    rows = []
    for i in range(spec.model.n):
        rows.append([i, policy.q[i], ana.sensor_aoi[i], rep.mean.mean_aoi[i], rep.stderr.mean_aoi[i],
                     ana.reset_probs[i], rep.mean.reset_rate[i], rep.stderr.reset_rate[i],
                     ana.sensor_ee[i], rep.mean.empirical_ee[i], rep.stderr.empirical_ee[i]])
    header = ["sensor", "q", "aoi_analytic", "aoi_sim", "aoi_sim_se", "reset_analytic", "reset_sim",
              "reset_sim_se", "ee_analytic", "ee_sim", "ee_sim_se"]
    write_csv(out / "simulation.csv", header, rows)
    hist = rep.mean.aoi_histogram
    write_csv(out / "aoi_histogram.csv", ["sensor"] + [f"aoi_{k + 1}" for k in range(spec.model.aoi_cap)],
              [[i] + hist[i].tolist() for i in range(spec.model.n)])
    files = ["simulation.csv", "aoi_histogram.csv"]
    if trace:
        simulate(cfg, trace=out / "trace.csv")
        files.append("trace.csv")
    return files


def run_sweep(spec: ExperimentSpec, out: Path, threads: int = 1, with_sim: bool = False) -> list[str]:
    sw = spec.sweep or {"start": 0.001, "stop": 0.1, "steps": 100}
    qs = np.linspace(sw["start"], sw["stop"], sw["steps"])
    s = homogeneous.sweep(spec.model, qs, spec.weights)
    sim = spec.simulation
    header = ["q", "aoi_analytic", "ee_analytic", "objective"]
    cols = [s.q, s.aoi, s.ee, s.objective]
    if with_sim:
        aoi_sim, ee_sim = simulate_homogeneous(spec.model, qs, sim["horizon"], sim["warmup"], spec.seed, threads)
        header += ["aoi_sim", "ee_sim"]
        cols += [aoi_sim, ee_sim]
    write_csv(out / "sweep.csv", header, zip(*cols))
    return ["sweep.csv"]


def run_opt_homogeneous(spec: ExperimentSpec, out: Path, step: float = homogeneous.DEFAULT_STEP) -> list[str]:
    m, w = spec.model, spec.weights
    sols = [homogeneous.age_optimal(m, w, step), homogeneous.energy_optimal(m, w, step),
            homogeneous.pareto_search(m, w, step)]
    write_csv(out / "homogeneous.csv",
              ["kind", "q_star", "aoi", "ee", "objective", "grid_q", "candidates", "flags"],
              [[s.kind, s.q_star, s.aoi_at_q, s.ee_at_q, s.objective_at_q, s.grid_q, s.candidates,
                "; ".join(s.flags)] for s in sols])
    hi = min(1.0, 3.0 / m.n)
    qs = homogeneous.grid(step, hi, step)
    s = homogeneous.sweep(m, qs, w)
    write_csv(out / "sweep.csv", ["q", "aoi", "ee", "objective"], zip(s.q, s.aoi, s.ee, s.objective))
    return ["homogeneous.csv", "sweep.csv"]


def run_opt_mspadam(spec: ExperimentSpec, out: Path, trajectory: bool = False) -> list[str]:
    cfg = replace(spec.optimizer, record_trajectory=trajectory)
    res = optimize(spec.model, cfg)
    files = write_optimization(out, spec.model, spec.weights, res, spec.seed)
    if trajectory:
        rows = [[s.index, it, j, step] for s in res.starts for it, j, step in s.trajectory]
        write_csv(out / "trajectory.csv", ["start", "iteration", "objective", "step_norm"], rows)
        files.append("trajectory.csv")
    return files


def write_optimization(out: Path, model: NetworkModel, weights: ObjectiveWeights,
                       res: OptimizationResult, seed: int) -> list[str]:
    write_csv(out / "policy.csv", ["sensor", "q"], enumerate(res.q_star.q))
    write_csv(out / "starts.csv",
              ["start", "initial_objective", "final_objective", "iterations", "converged", "failed", "best"],
              [[s.index, s.initial_objective, s.objective, s.iterations, s.converged, s.failed,
                s.index == res.best_start] for s in res.starts])
    rows = [["mspadam", res.objective, evaluate(res.q_star, model, weights).network_aoi,
             evaluate(res.q_star, model, weights).network_ee, contention_reduction(res.q_star)]]
    for kind in BASELINES:
        pol, rep = baseline(model, kind, seed=seed, weights=weights)
        rows.append([kind, rep.objective, rep.network_aoi, rep.network_ee, contention_reduction(pol)])
    write_csv(out / "strategies.csv", ["strategy", "objective", "network_aoi", "network_ee", "contention_reduction"], rows)
    (out / "report.txt").write_text(evaluate(res.q_star, model, weights).to_text()
                                    + "".join(f"warning: {w}\n" for w in res.warnings))
    return ["policy.csv", "starts.csv", "strategies.csv", "report.txt"]


# -- reproductions -------------------------------------------------------------

def simulate_homogeneous(model: NetworkModel, qs, horizon: int, warmup: int, seed: int,
                         threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    def one(k):
        cfg = SimConfig(model, Policy.homogeneous(model.n, qs[k]), horizon, derive_seed(seed, k), warmup)
        st = simulate(cfg)
        return st.network_aoi, st.network_ee
    res = pmap(one, list(range(len(qs))), threads)
    return np.array([r[0] for r in res]), np.array([r[1] for r in res])


def fig5_matrices(seed: int, n: int = 50) -> dict[str, CorrelationMatrix]:
    return {name: generate_correlation(n, 1.0, rng_, 1.0, derive_seed(seed, 5, k))
            for k, (name, rng_) in enumerate(FIG5_RANGES.items())}


def reproduce_fig5(out: Path, seed: int = 0, horizon: int = 200_000, warmup: int = 1_000,
                   points: int = 20, q_max: float = 0.1, threads: int = 1) -> tuple[list[str], dict]:
    """Homogeneous AoI / EE versus q, analytic and simulated, for three
    correlation ranges (n = 50, cap 20, E = 1e6, P_T = 100, P_I = 1)."""
    files, seeds, summary = [], {}, []
    qs = np.linspace(q_max / points, q_max, points)
    for k, (name, C) in enumerate(fig5_matrices(seed).items()):
        model = NetworkModel(C, 20)
        s = homogeneous.sweep(model, qs)
        sim_seed = derive_seed(seed, 5, 100 + k)
        seeds[name] = {"matrix": derive_seed(seed, 5, k), "simulation": sim_seed}
        aoi_sim, ee_sim = simulate_homogeneous(model, qs, horizon, warmup, sim_seed, threads)
        fname = f"fig5_{name}.csv"
        write_csv(out / fname, ["q", "aoi_analytic", "aoi_sim", "ee_analytic", "ee_sim"],
                  zip(qs, s.aoi, aoi_sim, s.ee, ee_sim))
        C.save(out / f"{name}.txt")
        files += [fname, f"{name}.txt"]
        age = homogeneous.age_optimal(model)
        ee = homogeneous.energy_optimal(model)
        summary.append([name, age.q_star, age.aoi_at_q, ee.q_star, ee.grid_q, ee.ee_at_q])
    write_csv(out / "fig5_summary.csv", ["matrix", "q_age", "aoi_at_q_age", "q_ee", "q_ee_grid", "ee_at_q_ee"], summary)
    files.append("fig5_summary.csv")
    return files, {"seed": seed, "matrices": seeds, "horizon": horizon, "warmup": warmup, "points": points}


def reproduce_fig6(out: Path, seed: int = 0, step: float = 1e-4) -> tuple[list[str], dict]:
    """J(q) for the three fig5 matrices with gamma1 = 0.02, gamma2 = 1, and
    the bounded-search optimum."""
    w = ObjectiveWeights(0.02, 1.0)
    files, summary = [], []
    for name, C in fig5_matrices(seed).items():
        model = NetworkModel(C, 20)
        qs = homogeneous.grid(0.001, 0.1, 0.001)
        s = homogeneous.sweep(model, qs, w)
        write_csv(out / f"fig6_{name}.csv", ["q", "aoi", "ee", "objective"], zip(s.q, s.aoi, s.ee, s.objective))
        files.append(f"fig6_{name}.csv")
        sol = homogeneous.pareto_search(model, w, step)
        e = homogeneous.energy_optimal(model, w)
        a = homogeneous.age_optimal(model, w)
        summary.append([name, e.q_star, a.q_star, sol.q_star, sol.objective_at_q, e.objective_at_q,
                        a.objective_at_q, sol.candidates])
    write_csv(out / "fig6_summary.csv", ["matrix", "q_ee", "q_age", "q_pareto", "J_pareto", "J_at_q_ee",
                                         "J_at_q_age", "candidates"], summary)
    files.append("fig6_summary.csv")
    return files, {"seed": seed, "gamma1": 0.02, "gamma2": 1.0, "step": step}


def _strategies_row(model: NetworkModel, cfg: OptimizerConfig, seed: int) -> tuple[list, OptimizationResult]:
    res = optimize(model, cfg)
    row = [res.objective]
    for kind in BASELINES:
        row.append(baseline(model, kind, seed=seed, weights=cfg.weights)[1].objective)
    return row, res


def exhaustive_min(model: NetworkModel, weights: ObjectiveWeights, points: int = 201) -> tuple[float, np.ndarray]:
    """Brute-force minimum of J over a uniform grid of [0, 1]^n (small n only)."""
    n = model.n
    g = np.linspace(0.0, 1.0, points)
    Q = np.stack(np.meshgrid(*([g] * n), indexing="ij"), axis=-1).reshape(-1, n)
    one_minus = 1.0 - Q
    p = np.empty_like(Q)
    for i in range(n):
        p[:, i] = np.prod(np.delete(one_minus, i, axis=1), axis=1)
    pr = (p * Q) @ model.C
    pw = model.power
    J = weights.gamma1 * mean_aoi(pr, model.aoi_cap).sum(axis=1) - weights.gamma2 * (
        pr / (pw.idle_power + Q * (pw.transmit_power - pw.idle_power))).sum(axis=1)
    k = int(np.argmin(J))
    return float(J[k]), Q[k]


def reproduce_fig4(out: Path, seed: int = 0, scenarios: int = 10, threads: int = 1) -> tuple[list[str], dict]:
    """n = 3, random correlation in [0, 0.5]: every strategy against a
    brute-force grid minimum."""
    def one(k):
        C = generate_correlation(3, 1.0, (0.0, 0.5), 1.0, derive_seed(seed, 4, k))
        model = NetworkModel(C, 20)
        cfg = OptimizerConfig(seed=derive_seed(seed, 4, 100 + k))
        row, res = _strategies_row(model, cfg, derive_seed(seed, 4, 200 + k))
        jmin, _ = exhaustive_min(model, cfg.weights)
        return [k, jmin] + row + list(res.q_star.q)
    rows = pmap(one, list(range(scenarios)), threads)
    header = ["scenario", "exhaustive"] + list(STRATEGY_COLUMNS) + ["q1", "q2", "q3"]
    write_csv(out / "fig4.csv", header, rows)
    return ["fig4.csv"], {"seed": seed, "scenarios": scenarios}


def reproduce_fig7(out: Path, seed: int = 0, sizes: Sequence[int] = FIG7_SIZES, density: float = 1.0,
                   threads: int = 1) -> tuple[list[str], dict]:
    """Strategies versus network size, random correlation in [0, 0.5]."""
    def one(k):
        n = sizes[k]
        C = generate_correlation(n, 1.0, (0.0, 0.5), density, derive_seed(seed, 7, n))
        model = NetworkModel(C, 20)
        cfg = OptimizerConfig(seed=derive_seed(seed, 7, 100 + n))
        row, res = _strategies_row(model, cfg, derive_seed(seed, 7, 200 + n))
        return [n] + row + [contention_reduction(res.q_star)], res.q_star.q
    got = pmap(one, list(range(len(sizes))), threads)
    write_csv(out / "fig7.csv", ["n"] + list(STRATEGY_COLUMNS) + ["contention_reduction"], [g[0] for g in got])
    width = max(sizes)
    write_csv(out / "table2.csv", ["n"] + [f"q{i + 1}" for i in range(width)],
              [[n] + list(q) + [""] * (width - n) for n, (_, q) in zip(sizes, got)])
    return ["fig7.csv", "table2.csv"], {"seed": seed, "sizes": list(sizes), "density": density}


def _fig8_results(seed: int, levels: Sequence[float], n: int, threads: int):
    def one(k):
        model = NetworkModel(CorrelationMatrix.constant(n, levels[k]), 20)
        cfg = OptimizerConfig(seed=derive_seed(seed, 8, k))
        return _strategies_row(model, cfg, derive_seed(seed, 8, 100 + k))
    return pmap(one, list(range(len(levels))), threads)


def reproduce_fig8(out: Path, seed: int = 0, levels: Sequence[float] = FIG8_LEVELS, n: int = 10,
                   threads: int = 1) -> tuple[list[str], dict]:
    """Strategies versus a constant off-diagonal correlation level, n = 10."""
    got = _fig8_results(seed, levels, n, threads)
    j0 = got[0][0][0] if levels[0] == 0 else None
    rows = []
    for c, (row, res) in zip(levels, got):
        gain = (j0 - row[0]) / abs(j0) if j0 else None
        rows.append([c] + row + [gain, contention_reduction(res.q_star)])
    write_csv(out / "fig8.csv", ["offdiag"] + list(STRATEGY_COLUMNS) + ["improvement_vs_independent",
                                                                         "contention_reduction"], rows)
    write_csv(out / "table3.csv", ["offdiag"] + [f"q{i + 1}" for i in range(n)],
              [[c] + list(res.q_star.q) for c, (_, res) in zip(levels, got)])
    return ["fig8.csv", "table3.csv"], {"seed": seed, "levels": list(levels), "n": n}


def reproduce_table3(out: Path, seed: int = 0, levels: Sequence[float] = FIG8_LEVELS, n: int = 10,
                     threads: int = 1) -> tuple[list[str], dict]:
    got = _fig8_results(seed, levels, n, threads)
    write_csv(out / "table3.csv", ["offdiag"] + [f"q{i + 1}" for i in range(n)] + ["objective", "contention_reduction"],
              [[c] + list(res.q_star.q) + [res.objective, contention_reduction(res.q_star)]
               for c, (_, res) in zip(levels, got)])
    return ["table3.csv"], {"seed": seed, "levels": list(levels), "n": n}


REPRODUCTIONS = {
    "fig4": reproduce_fig4,
    "fig5": reproduce_fig5,
    "fig6": reproduce_fig6,
    "fig7": reproduce_fig7,
    "fig8": reproduce_fig8,
    "table3": reproduce_table3,
}
