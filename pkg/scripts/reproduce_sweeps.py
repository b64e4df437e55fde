"""Run both parameter sweeps at full scale (n up to 1000, d = 1000) and print the per-value means.

    python scripts/reproduce_sweeps.py --out results --jobs 4
    python scripts/reproduce_sweeps.py --average-over population
"""

import argparse
import dataclasses
from pathlib import Path

from fedincentive.experiment import aggregate, load_config, run_sweep, trend_fraction

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--average-over", choices=("participants", "population"), default="participants")
    args = ap.parse_args()

    for name, expect in (("sweep_n", ("up", "up", "down")), ("sweep_nu_max", ("down", "down", "up"))):
        cfg = load_config(CONFIGS / f"{name}.json")
        cfg = dataclasses.replace(cfg, seeds=tuple(range(args.seeds)), average_over=args.average_over,
                                  out=str(Path(args.out) / f"{name}_{args.average_over}"))
        agg = aggregate(run_sweep(cfg, jobs=args.jobs))
        print(f"\n{name} ({args.average_over} averaging) -> {cfg.out}")
        print(f"{cfg.sweep_var:>8} {'|S|':>8} {'R*':>8} {'U_s':>9} {'U_i':>10}")
        for j, x in enumerate(agg["x"]["values"]):
            print(f"{x:>8g} {agg['num_participants']['mean'][j]:>8.2f} {agg['r_star']['mean'][j]:>8.4f} "
                  f"{agg['server_utility']['mean'][j]:>9.4f} {agg['user_utility_mean']['mean'][j]:>10.6f}")
        for metric, direction in zip(("num_participants", "server_utility", "user_utility_mean"), expect):
            frac = trend_fraction(agg[metric]["mean"], direction)
            print(f"  {metric}: {frac:.0%} of adjacent pairs {direction}")


if __name__ == "__main__":
    main()
