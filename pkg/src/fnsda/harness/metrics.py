"""Per-trajectory error metrics and the run report."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError

MAPE_EPS = 1e-8

CSV_COLUMNS = (
    "run_id",
    "family",
    "task",
    "env_index",
    "traj_index",
    "rmse",
    "mape",
    "adapted_params",
    "wall_ms",
)


def rmse_per_traj(pred, true):
    """sqrt(mean squared error) over all time x state entries.

    The initial state is the rollout's given condition and must already
    be excluded by the caller.
    """
    pred = np.asarray(pred)
    true = np.asarray(true)
    if pred.shape != true.shape:
        raise ShapeError(f"rmse: shapes {pred.shape} vs {true.shape}")
    return float(np.sqrt(np.mean((pred - true) ** 2)))


def mape_per_traj(pred, true, eps=MAPE_EPS):
    pred = np.asarray(pred)
    true = np.asarray(true)
    if pred.shape != true.shape:
        raise ShapeError(f"mape: shapes {pred.shape} vs {true.shape}")
    return float(np.mean(np.abs(pred - true) / np.maximum(np.abs(true), eps)))


@dataclass
class TrajectoryRow:
    env_index: int
    traj_index: int
    rmse: float
    mape: float
    divergent: bool = False


@dataclass
class MetricsReport:
    run_id: str
    family: str
    task: str
    rows: list = field(default_factory=list)
    adapted_params: int = 0
    wall_ms: float = 0.0
    config_digest: str = ""

    def per_env(self):
        envs = {}
        for row in self.rows:
            envs.setdefault(row.env_index, []).append(row)
        out = {}
        for env, rows in sorted(envs.items()):
            finite = [r for r in rows if not r.divergent]
            out[env] = {
                "rmse": float(np.mean([r.rmse for r in finite])) if finite else float("nan"),
                "mape": float(np.mean([r.mape for r in finite])) if finite else float("nan"),
                "n": len(rows),
                "n_divergent": len(rows) - len(finite),
            }
        return out

    @property
    def aggregate_rmse(self):
        """Mean over environments of the per-environment means."""
        per_env = [v["rmse"] for v in self.per_env().values()]
        return float(np.mean(per_env)) if per_env else float("nan")

    @property
    def aggregate_mape(self):
        per_env = [v["mape"] for v in self.per_env().values()]
        return float(np.mean(per_env)) if per_env else float("nan")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in self.rows:
                writer.writerow(
                    [
                        self.run_id,
                        self.family,
                        self.task,
                        row.env_index,
                        row.traj_index,
                        repr(row.rmse),
                        repr(row.mape),
                        self.adapted_params,
                        repr(self.wall_ms),
                    ]
                )


def merge_reports(csv_paths, out_path):
    """One aggregated row per (run, environment); traj_index -1 marks
    the aggregate."""
    groups = {}
    order = []
    for path in csv_paths:
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                key = (rec["run_id"], rec["family"], rec["task"], int(rec["env_index"]))
                if key not in groups:
                    groups[key] = {"rmse": [], "mape": [], "rec": rec}
                    order.append(key)
                groups[key]["rmse"].append(float(rec["rmse"]))
                groups[key]["mape"].append(float(rec["mape"]))
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for key in order:
            g = groups[key]
            finite_r = [v for v in g["rmse"] if np.isfinite(v)]
            finite_m = [v for v in g["mape"] if np.isfinite(v)]
            writer.writerow(
                [
                    key[0],
                    key[1],
                    key[2],
                    key[3],
                    -1,
                    repr(float(np.mean(finite_r))) if finite_r else "nan",
                    repr(float(np.mean(finite_m))) if finite_m else "nan",
                    g["rec"]["adapted_params"],
                    g["rec"]["wall_ms"],
                ]
            )
    return len(order)
