"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, experiments
from .config import load_spec
from .errors import ConfigError, ModelError

log = logging.getLogger("corraloha")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="YAML experiment file")
    p.add_argument("--seed", type=int, help="base seed (overrides the config)")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps/replications/starts")
    p.add_argument("--verbose", "-v", action="count", default=0)
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. --set model.n=5 --set policy.q=0.1")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="corraloha", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analytic", parents=[common], help="closed-form metrics for one policy")
    a.add_argument("--dump-gradient", action="store_true", help="also write gradient.csv")

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo simulation of one policy")
    s.add_argument("--trace", action="store_true", help="write a per-slot trace.csv (one replication)")

    w = sub.add_parser("sweep", parents=[common], help="homogeneous q sweep")
    w.add_argument("--simulate", action="store_true", help="add simulated columns")

    h = sub.add_parser("opt-homogeneous", parents=[common], help="age/EE/Pareto homogeneous optima")
    h.add_argument("--step", type=float, default=1e-4, help="search precision")

    m = sub.add_parser("opt-mspadam", parents=[common], help="heterogeneous multi-start optimisation")
    m.add_argument("--trajectory", action="store_true", help="write trajectory.csv")

    r = sub.add_parser("reproduce", parents=[common], help="regenerate a figure/table analogue")
    r.add_argument("target", choices=sorted(experiments.REPRODUCTIONS))
    r.add_argument("--horizon", type=int, default=200_000, help="fig5 simulation slots per point")
    r.add_argument("--warmup", type=int, default=1_000)
    r.add_argument("--points", type=int, default=20, help="fig5 q grid points")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _run(args: argparse.Namespace) -> Path:
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    if args.command == "reproduce":
        seed = 0 if args.seed is None else args.seed
        out = args.out or Path("results") / args.target
        fn = experiments.REPRODUCTIONS[args.target]
        kwargs = {"seed": seed}
        if args.target == "fig5":
            if not args.horizon > args.warmup >= 0 or args.points < 1:
                raise ConfigError("fig5 needs horizon > warmup >= 0 and points >= 1")
            kwargs.update(horizon=args.horizon, warmup=args.warmup, points=args.points)
        if args.target != "fig6":
            kwargs["threads"] = args.threads
        files, params = fn(out, **kwargs)
        experiments.write_manifest(out, f"reproduce {args.target}", params, {"base": seed}, files)
        return out

    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"output={args.out}")
    spec = load_spec(args.config, overrides)
    out = spec.output
    if args.command == "analytic":
        files = experiments.run_analytic(spec, out, args.dump_gradient)
    elif args.command == "simulate":
        files = experiments.run_simulate(spec, out, args.threads, args.trace)
    elif args.command == "sweep":
        files = experiments.run_sweep(spec, out, args.threads, args.simulate)
    elif args.command == "opt-homogeneous":
        files = experiments.run_opt_homogeneous(spec, out, args.step)
    elif args.command == "opt-mspadam":
        spec.optimizer = replace(spec.optimizer, threads=args.threads)
        files = experiments.run_opt_mspadam(spec, out, args.trajectory)
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown command {args.command}")
    experiments.write_manifest(out, args.command, spec.raw, {"base": spec.seed, "optimizer": spec.optimizer.seed}, files)
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        out = _run(args)
    except (ConfigError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
