"""Repeated experiment execution with metrics persistence and one-axis sweeps.

Outputs per run directory: metrics.csv (one row per repeat and round),
summary.json (rolling-window accuracy statistics across repeats), and
config.resolved (the fully resolved config document). A sweep adds sweep.csv
with one row per swept value, in the order given.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, config_to_dict, parse_config_dict, resolved_document
from .simulation import STREAM_REPEAT, run_experiment

METRICS_HEADER = ["repeat", "round", "test_accuracy", "test_loss", "accepted_count",
                  "malicious_sampled", "malicious_accepted", "agg_update_norm",
                  "server_update_norm"]
SWEEP_HEADER = ["value", "final_acc_mean", "final_acc_min", "final_acc_max"]

# sweepable scalar -> (config section, key)
SWEEP_AXES = {
    "beta": ("attack", "beta"),
    "gamma": ("server", "gamma"),
    "alpha": ("defense", "alpha"),
    "rho": ("defense", "rho"),
    "theta": ("defense", "theta"),
    "tau": ("server", "tau"),
    "alpha_dirichlet": ("data", "dirichlet_alpha"),
}


def _fmt(x: float) -> str:
    # 17 significant digits round-trip float64 losslessly
    return f"{x:.17g}"


def rolling_mean(values, window: int) -> np.ndarray:
    """Trailing mean; partial windows at the start average what is available."""
    if window < 1:
        raise ValueError("window must be positive")
    vals = np.asarray(values, dtype=np.float64)
    out = np.empty_like(vals)
    for t in range(len(vals)):
        out[t] = vals[max(0, t - window + 1):t + 1].mean()
    return out


def repeat_seed(master_seed: int, repeat: int) -> int:
    """Per-repeat master seed derived by hashing (master_seed, repeat)."""
    seq = np.random.SeedSequence([int(master_seed), STREAM_REPEAT, int(repeat)])
    return int(seq.generate_state(1, np.uint64)[0])


def run_repeats(config: ExperimentConfig) -> list:
    """RoundRecord lists for every repeat, each under its derived seed."""
    results = []
    for r in range(config.run.repeats):
        raw = config_to_dict(config)
        raw["run"]["master_seed"] = repeat_seed(config.run.master_seed, r)
        results.append(run_experiment(parse_config_dict(raw)))
    return results


def summarize(config: ExperimentConfig, per_repeat_records: list) -> dict:
    window = config.run.rolling_window
    rolling = np.array([rolling_mean([rec.test_accuracy for rec in records], window)
                        for records in per_repeat_records])
    summary = {
        "rounds": config.run.rounds,
        "repeats": config.run.repeats,
        "rolling_window": window,
    }
    if rolling.size:
        summary["rolling_accuracy_mean"] = rolling.mean(axis=0).tolist()
        summary["rolling_accuracy_min"] = rolling.min(axis=0).tolist()
        summary["rolling_accuracy_max"] = rolling.max(axis=0).tolist()
        final = rolling[:, -1]
        summary["final_accuracy"] = {"mean": float(final.mean()),
                                     "min": float(final.min()),
                                     "max": float(final.max())}
    else:
        summary["rolling_accuracy_mean"] = []
        summary["rolling_accuracy_min"] = []
        summary["rolling_accuracy_max"] = []
        summary["final_accuracy"] = None
    return summary


def write_metrics_csv(path, per_repeat_records: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for r, records in enumerate(per_repeat_records):
            for rec in records:
                writer.writerow([
                    r, rec.round, _fmt(rec.test_accuracy), _fmt(rec.test_loss),
                    len(rec.accepted_ids), rec.num_malicious_sampled,
                    rec.num_malicious_accepted, _fmt(rec.aggregate_update_norm),
                    _fmt(rec.server_update_norm),
                ])


def run_and_persist(config: ExperimentConfig, out_dir) -> dict:
    """Run all repeats and write metrics.csv, summary.json, config.resolved."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_repeat = run_repeats(config)
    write_metrics_csv(out / "metrics.csv", per_repeat)
    summary = summarize(config, per_repeat)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    (out / "config.resolved").write_text(resolved_document(config))
    return summary


def apply_axis(config: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    """Config with the swept scalar replaced; revalidated from scratch."""
    if axis not in SWEEP_AXES:
        valid = ", ".join(sorted(SWEEP_AXES))
        raise ConfigError(f"unknown sweep axis {axis!r}; valid axes: {valid}")
    section, key = SWEEP_AXES[axis]
    raw = config_to_dict(config)
    raw[section][key] = float(value)
    return parse_config_dict(raw)


def sweep(config: ExperimentConfig, axis: str, values, out_dir) -> list:
    """One experiment per value under the same master seed; rows in input order."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        point_config = apply_axis(config, axis, value)
        summary = run_and_persist(point_config, out / f"{axis}_{value:g}")
        final = summary["final_accuracy"]
        rows.append({
            "value": float(value),
            "final_acc_mean": final["mean"] if final else float("nan"),
            "final_acc_min": final["min"] if final else float("nan"),
            "final_acc_max": final["max"] if final else float("nan"),
        })
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow([_fmt(row["value"]), _fmt(row["final_acc_mean"]),
                             _fmt(row["final_acc_min"]), _fmt(row["final_acc_max"])])
    return rows
