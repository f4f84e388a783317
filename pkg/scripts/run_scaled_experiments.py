#!/usr/bin/env python3
"""Run the scaled robustness grid and print a compact accuracy table.

Covers beta in {0, 0.3, 0.6} x filter in {none, angle, loss} x gamma in
{0, 0.1} with geometric-median aggregation, plus the plain-averaging contrast
column at gamma=0. Takes a few minutes at full length; use --quick for a
shorter smoke version.
"""
import argparse
import csv
import time
from pathlib import Path

from byzsim.config import parse_config_dict
from byzsim.runner import run_and_persist

BETAS = (0.0, 0.3, 0.6)
FILTERS = ("none", "angle", "loss")
GAMMAS = (0.0, 0.1)


def scaled_config(beta, gamma, filt, aggregator, rounds, seed):
    return parse_config_dict({
        "model": {"kind": "softmax-regression", "input_dim": 10, "num_classes": 5},
        "loss": {"weight_decay": 1.0e-4},
        "data": {"num_clients": 50, "dirichlet_alpha": 0.3, "train_per_class": 1000,
                 "test_per_class": 200, "spread": 1.0},
        "server_data": {"n0": 100, "mean_shift": 1.0, "drop_classes": [0]},
        "clients": {"sampled_per_round": 10, "epochs": 2, "batch_size": 50,
                    "learning_rate": 0.1},
        "server": {"gamma": gamma, "learning_rate": 0.1, "epochs": 2, "batch_size": 50,
                   "tau": 1.0},
        "defense": {"filter": filt, "aggregator": aggregator},
        "attack": {"beta": beta},
        "run": {"rounds": rounds, "master_seed": seed, "repeats": 3, "rolling_window": 20},
    })


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/scaled_grid", help="output directory")
    parser.add_argument("--seed", type=int, default=20260811)
    parser.add_argument("--rounds", type=int, default=300)
    parser.add_argument("--quick", action="store_true", help="60 rounds instead of 300")
    args = parser.parse_args()
    rounds = 60 if args.quick else args.rounds
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    cases = [(beta, gamma, filt, "geomed") for beta in BETAS for gamma in GAMMAS
             for filt in FILTERS]
    cases += [(beta, 0.0, "none", "average") for beta in BETAS]

    results = {}
    started = time.time()
    for beta, gamma, filt, agg in cases:
        label = f"beta{beta:g}_gamma{gamma:g}_{filt}_{agg}"
        config = scaled_config(beta, gamma, filt, agg, rounds, args.seed)
        summary = run_and_persist(config, out / label)
        final = summary["final_accuracy"]
        results[(beta, gamma, filt, agg)] = final
        print(f"{label:40s} acc mean={final['mean']:.4f} "
              f"min={final['min']:.4f} max={final['max']:.4f}")

    with open(out / "grid.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["beta", "gamma", "filter", "aggregator",
                         "final_acc_mean", "final_acc_min", "final_acc_max"])
        for (beta, gamma, filt, agg), final in results.items():
            writer.writerow([beta, gamma, filt, agg, final["mean"], final["min"],
                             final["max"]])

    print(f"\nfinal accuracy (mean of 3 runs, rolling window 20, {rounds} rounds)")
    header = "  ".join(f"{filt:>7s}" for filt in FILTERS) + "  average"
    for gamma in GAMMAS:
        print(f"\ngamma = {gamma:g}")
        print(f"{'beta':>6s}  {header}")
        for beta in BETAS:
            row = [results[(beta, gamma, filt, 'geomed')]["mean"] for filt in FILTERS]
            cells = "  ".join(f"{v:7.4f}" for v in row)
            avg = results.get((beta, 0.0, "none", "average"))
            avg_cell = f"  {avg['mean']:7.4f}" if gamma == 0.0 else ""
            print(f"{beta:6g}  {cells}{avg_cell}")
    print(f"\nwrote {out}/grid.csv  ({time.time() - started:.0f}s)")


if __name__ == "__main__":
    main()
