"""Private training at the equilibrium budgets next to a noise-free control.

    python scripts/train_at_equilibrium.py --config configs/train_d100.json
"""

import argparse

import numpy as np

from fedincentive.experiment import load_config, run_training_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/train_d100.json")
    ap.add_argument("--out")
    args = ap.parse_args()
    cfg = load_config(args.config)
    rows = run_training_experiment(cfg, out=args.out)
    print(f"{'seed':>4} {'|S|':>4} {'R*':>8} {'private':>10} {'noiseless':>10}")
    for r in rows:
        print(f"{r.seed:>4} {r.num_participants:>4} {r.r_star:>8.4f} {r.final_loss_private:>10.5f} {r.final_loss_noiseless:>10.5f}")
    gap = np.mean([r.final_loss_private - r.final_loss_noiseless for r in rows])
    print(f"mean extra loss from privacy noise: {gap:.5f}")


if __name__ == "__main__":
    main()
