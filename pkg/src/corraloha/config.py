"""Experiment specification files (YAML) and their validation.

Example::

    name: c1-sweep
    seed: 3
    model: {n: 50, aoi_cap: 20, transmit_power: 100, idle_power: 1, budget: 1.0e6}
    correlation:
      generate: {diag: 1, offdiag_range: [0, 0.3], density: 1, seed: 7}
    policy: {strategy: homogeneous_pareto}
    weights: {gamma1: 0.02, gamma2: 1}
    sweep: {variable: q, start: 0.001, stop: 0.1, steps: 100}
    simulation: {horizon: 200000, warmup: 1000, replications: 1}
    output: results/c1-sweep

Matrix files are resolved relative to the config file's directory.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError, ModelError
from .model import CorrelationMatrix, NetworkModel, ObjectiveWeights, PowerProfile, generate_correlation, load_matrix
from .mspadam import BASELINES, OptimizerConfig

STRATEGIES = ("mspadam",) + BASELINES

DEFAULTS: dict[str, Any] = {
    "name": "experiment",
    "seed": 0,
    "model": {"n": 10, "aoi_cap": 20, "transmit_power": 100.0, "idle_power": 1.0, "budget": 1.0e6},
    "correlation": {"generate": {"diag": 1.0, "offdiag_range": [0.0, 0.3], "density": 1.0, "seed": 0}},
    "policy": {"strategy": "homogeneous_pareto"},
    "weights": {"gamma1": 0.1, "gamma2": 1.0},
    "sweep": None,
    "simulation": {"horizon": 100_000, "warmup": 1_000, "replications": 1},
    "optimizer": {},
    "output": "results",
}

_OPT_FIELDS = {f.name for f in fields(OptimizerConfig)} - {"weights"}


@dataclass
class ExperimentSpec:
    name: str
    seed: int
    model: NetworkModel
    correlation_source: dict
    policy_source: dict
    weights: ObjectiveWeights
    sweep: dict | None
    simulation: dict
    optimizer: OptimizerConfig
    output: Path
    raw: dict = field(default_factory=dict)


class _Lines:
    """Maps dotted key paths to source line numbers of a YAML document."""

    def __init__(self, text: str | None) -> None:
        self.lines: dict[str, int] = {}
        if text:
            try:
                node = yaml.compose(text, Loader=yaml.SafeLoader)
            except yaml.YAMLError:
                node = None
            if node is not None:
                self._walk(node, "")

    def _walk(self, node, prefix: str) -> None:
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = f"{prefix}.{k.value}" if prefix else str(k.value)
                self.lines[key] = k.start_mark.line + 1
                self._walk(v, key)

    def at(self, key: str) -> str:
        while key:
            if key in self.lines:
                return f"line {self.lines[key]}: "
            key = key.rpartition(".")[0]
        return ""


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("correlation", "policy"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(item: str) -> tuple[list[str], Any]:
    """``a.b.c=value`` with a YAML-parsed value."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, _, value = item.partition("=")
    try:
        val = yaml.safe_load(value)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {item!r}: {exc}") from None
    return key.strip().split("."), val


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    raw = copy.deepcopy(raw)
    for item in overrides:
        path, val = parse_override(item)
        d = raw
        for k in path[:-1]:
            if not isinstance(d.get(k), dict):
                d[k] = {}
            d = d[k]
        d[path[-1]] = val
    return raw


def load_raw(path: str | os.PathLike | None) -> tuple[dict, str | None]:
    if path is None:
        return {}, None
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        raise ConfigError(f"{path}: {where}invalid YAML ({getattr(exc, 'problem', exc)})") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data, text


def _num(d: dict, key: str, where: str, lines: _Lines, kind=float, default=None):
    val = d.get(key, default)
    try:
        if isinstance(val, bool):
            raise TypeError
        out = kind(val)
        if kind is int and out != val:
            raise TypeError
        return out
    except (TypeError, ValueError):
        raise ConfigError(f"{lines.at(where + '.' + key)}field '{where}.{key}' must be {kind.__name__}, got {val!r}") from None


def build_spec(raw: dict, base_dir: str | os.PathLike = ".", text: str | None = None) -> ExperimentSpec:
    lines = _Lines(text)
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"{lines.at(key)}unknown field '{key}'")
    for key in ("correlation", "policy"):
        if key in raw and isinstance(raw[key], dict) and len(raw[key]) != 1:
            raise ConfigError(f"{lines.at(key)}field '{key}' needs exactly one source, got {sorted(raw[key])}")
    cfg = _merge(DEFAULTS, raw)
    base_dir = Path(base_dir)

    m = cfg["model"]
    if not isinstance(m, dict):
        raise ConfigError(f"{lines.at('model')}field 'model' must be a mapping")
    n = _num(m, "n", "model", lines, int)
    if n < 1:
        raise ConfigError(f"{lines.at('model.n')}field 'model.n' must be >= 1")

    corr = cfg["correlation"]
    if not isinstance(corr, dict) or len(corr) != 1:
        raise ConfigError(f"{lines.at('correlation')}field 'correlation' needs exactly one of file/generate/constant")
    (src, val), = corr.items()
    try:
        if src == "file":
            p = Path(val)
            if not p.is_absolute():
                p = base_dir / p
            try:
                C = load_matrix(p)
            except OSError as exc:
                raise ConfigError(f"{lines.at('correlation.file')}cannot read matrix: {exc}") from None
            except ValueError as exc:
                if isinstance(exc, ModelError):
                    raise
                raise ConfigError(f"{lines.at('correlation.file')}malformed matrix file {p}: {exc}") from None
        elif src == "generate":
            g = dict(DEFAULTS["correlation"]["generate"], **(val or {}))
            unknown = set(g) - {"diag", "offdiag_range", "density", "seed"}
            if unknown:
                raise ConfigError(f"{lines.at('correlation.generate')}unknown field(s) {sorted(unknown)}")
            rng_ = g["offdiag_range"]
            if not (isinstance(rng_, (list, tuple)) and len(rng_) == 2):
                raise ConfigError(f"{lines.at('correlation.generate.offdiag_range')}offdiag_range must be [lo, hi]")
            C = generate_correlation(n, float(g["diag"]), (float(rng_[0]), float(rng_[1])),
                                     float(g["density"]), _num(g, "seed", "correlation.generate", lines, int))
            corr = {"generate": g}
        elif src == "constant":
            C = CorrelationMatrix.constant(n, float(val))
        else:
            raise ConfigError(f"{lines.at('correlation.' + str(src))}unknown correlation source '{src}'")
        if C.n != n:
            raise ConfigError(f"{lines.at('correlation')}matrix is {C.n}x{C.n} but model.n = {n}")
        model = NetworkModel(
            C,
            _num(m, "aoi_cap", "model", lines, int),
            PowerProfile(_num(m, "transmit_power", "model", lines), _num(m, "idle_power", "model", lines),
                         _num(m, "budget", "model", lines)),
        )
    except ModelError as exc:
        raise ConfigError(f"{lines.at('model')}invalid model: {exc}") from None

    pol = cfg["policy"]
    if not isinstance(pol, dict) or len(pol) != 1:
        raise ConfigError(f"{lines.at('policy')}field 'policy' needs exactly one of q/strategy")
    (psrc, pval), = pol.items()
    if psrc == "q":
        qv = np.atleast_1d(np.asarray(pval, dtype=float))
        if qv.size == 1:
            qv = np.full(n, float(qv[0]))
        if qv.shape != (n,) or np.any((qv < 0) | (qv > 1)):
            raise ConfigError(f"{lines.at('policy.q')}policy.q must be a probability or a list of {n} probabilities")
        pol = {"q": qv.tolist()}
    elif psrc == "strategy":
        if pval not in STRATEGIES:
            raise ConfigError(f"{lines.at('policy.strategy')}unknown strategy {pval!r}; expected one of {STRATEGIES}")
    else:
        raise ConfigError(f"{lines.at('policy.' + str(psrc))}unknown policy source '{psrc}'")

    wd = cfg["weights"]
    try:
        weights = ObjectiveWeights(_num(wd, "gamma1", "weights", lines), _num(wd, "gamma2", "weights", lines))
    except ModelError as exc:
        raise ConfigError(f"{lines.at('weights')}{exc}") from None

    sw = cfg["sweep"]
    if sw is not None:
        if not isinstance(sw, dict):
            raise ConfigError(f"{lines.at('sweep')}field 'sweep' must be a mapping")
        if sw.get("variable", "q") != "q":
            raise ConfigError(f"{lines.at('sweep.variable')}only the homogeneous 'q' sweep is supported")
        sw = {"variable": "q", "start": _num(sw, "start", "sweep", lines, default=0.001),
              "stop": _num(sw, "stop", "sweep", lines, default=0.1),
              "steps": _num(sw, "steps", "sweep", lines, int, default=100)}
        if not (0 <= sw["start"] <= sw["stop"] <= 1 and sw["steps"] >= 1):
            raise ConfigError(f"{lines.at('sweep')}sweep needs 0 <= start <= stop <= 1 and steps >= 1")

    sim = cfg["simulation"]
    sim = {"horizon": _num(sim, "horizon", "simulation", lines, int),
           "warmup": _num(sim, "warmup", "simulation", lines, int),
           "replications": _num(sim, "replications", "simulation", lines, int)}
    if not (sim["horizon"] > sim["warmup"] >= 0 and sim["replications"] >= 1):
        raise ConfigError(f"{lines.at('simulation')}simulation needs horizon > warmup >= 0 and replications >= 1")

    od = cfg["optimizer"] or {}
    bad = set(od) - _OPT_FIELDS
    if bad:
        key = sorted(bad)[0]
        raise ConfigError(f"{lines.at('optimizer.' + key)}unknown optimizer field '{key}'")
    try:
        opt = OptimizerConfig(weights=weights, **{"seed": int(cfg["seed"]), **od})
    except (ModelError, TypeError) as exc:
        raise ConfigError(f"{lines.at('optimizer')}invalid optimizer settings: {exc}") from None

    resolved = dict(cfg, correlation=corr, policy=pol, sweep=sw, simulation=sim,
                    weights={"gamma1": weights.gamma1, "gamma2": weights.gamma2})
    return ExperimentSpec(
        name=str(cfg["name"]),
        seed=int(cfg["seed"]),
        model=model,
        correlation_source=corr,
        policy_source=pol,
        weights=weights,
        sweep=sw,
        simulation=sim,
        optimizer=opt,
        output=Path(cfg["output"]),
        raw=resolved,
    )


def load_spec(path: str | os.PathLike | None, overrides: list[str] | None = None) -> ExperimentSpec:
    raw, text = load_raw(path)
    if overrides:
        raw = apply_overrides(raw, overrides)
    base = Path(path).parent if path is not None else Path(".")
    return build_spec(raw, base, text)
