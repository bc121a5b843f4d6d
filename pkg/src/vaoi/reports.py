"""CSV and JSON artifact writers shared by the CLI subcommands."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .model import SystemParams


def fmt(x) -> str:
    """Stable scalar formatting for delimited output."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def write_policy_grid_csv(path, params: SystemParams, policy: np.ndarray) -> Path:
    """Action grid with one row per age value and one column per battery level."""
    grid = np.asarray(policy).reshape(params.delta_max + 1, params.B + 1)
    header = ["delta"] + [f"b={b}" for b in range(params.B + 1)]
    rows = [[d, *grid[d]] for d in range(params.delta_max + 1)]
    return write_csv(path, header, rows)


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, default=_jsonify)
        f.write("\n")
    return path


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def policy_payload(params: SystemParams, policy: np.ndarray, manifest: dict) -> dict:
    return {"manifest": manifest,
            "states": [[s.delta, s.b] for s in _states(params)],
            "actions": np.asarray(policy).astype(int).tolist()}


def value_payload(params: SystemParams, value: np.ndarray, avg_cost: float,
                  iterations: int, manifest: dict) -> dict:
    return {"manifest": manifest,
            "states": [[s.delta, s.b] for s in _states(params)],
            "values": np.asarray(value, dtype=float).tolist(),
            "avg_cost": float(avg_cost),
            "iterations": int(iterations)}


def _states(params: SystemParams):
    from .model import enumerate_states
    return enumerate_states(params)
