"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, MechanismError
from .experiment import (
    ExperimentConfig, load_config, run_sweep, run_training_experiment, sample_nus,
)
from .game import make_population, nash_equilibrium
from .server import optimal_reward

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    if getattr(args, "out", None):
        cfg = dataclasses.replace(cfg, out=args.out)
    return cfg


def _users(args, cfg: ExperimentConfig):
    if args.nu:
        return make_population(args.nu)
    return make_population(sample_nus(cfg.n, cfg.nu_min, cfg.nu_max, cfg.seeds[0]))


def _emit(records: list[dict], fmt: str) -> None:
    if fmt == "json":
        json.dump(records, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return
    w = csv.DictWriter(sys.stdout, fieldnames=list(records[0]))
    w.writeheader()
    w.writerows(records)


def cmd_equilibrium(args) -> int:
    cfg = _config(args)
    users = _users(args, cfg)
    if args.reward is None:
        raise ConfigError("equilibrium needs --reward")
    eq = nash_equilibrium(users, args.reward)
    util = eq.utilities(users)
    records = [
        {"id": u.id, "nu": u.nu, "participating": bool(b > 0),
         "budget": b if b > 0 else "", "payment": float(p), "utility": float(ut)}
        for u, b, p, ut in zip(users, eq.budgets.budgets, eq.payments, util)
    ]
    _emit(records, args.format)
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _config(args)
    users = _users(args, cfg)
    sol = optimal_reward(users, cfg.params, tol=args.tol, method=args.method, average_over=cfg.average_over)
    eq = nash_equilibrium(users, sol.r_star)
    _emit([{
        "num_users": len(users), "num_participants": len(eq.participants),
        "r_star": sol.r_star, "server_utility": sol.u_s_star, "derivative": sol.derivative,
        "iterations": sol.iterations, "method": sol.method,
    }], args.format)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if cfg.out is None:
        raise ConfigError("sweep needs an output directory (--out or 'out' in the config)")
    rows = run_sweep(cfg, jobs=args.jobs)
    print(f"wrote {len(rows)} rows to {Path(cfg.out) / 'sweep.csv'}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    if cfg.out is None:
        raise ConfigError("train needs an output directory (--out or 'out' in the config)")
    summaries = run_training_experiment(cfg)
    priv = np.mean([s.final_loss_private for s in summaries])
    ctrl = np.mean([s.final_loss_noiseless for s in summaries])
    print(f"{len(summaries)} seeds: mean final loss private={priv:.6g} noiseless={ctrl:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedincentive", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="override the config's seed list with one seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equilibrium", parents=[common], help="second-stage equilibrium for a reward")
    p.add_argument("--nu", type=float, nargs="+", help="privacy values; sampled from the config if omitted")
    p.add_argument("--reward", type=float)
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("optimize-reward", parents=[common], help="server's optimal total reward")
    p.add_argument("--nu", type=float, nargs="+")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--method", choices=("bisection", "newton", "golden-section"), default="bisection")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", parents=[common], help="parameter sweep to CSV")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train", parents=[common], help="private training at the equilibrium budgets")
    p.set_defaults(func=cmd_train)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MechanismError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
