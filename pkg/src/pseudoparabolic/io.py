"""Trace CSV, snapshot JSON and report JSON on disk."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .dynamics import COLUMNS, Status, Trajectory

HEADER = ",".join(COLUMNS)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_trace(path, traj: Trajectory) -> None:
    """CSV with the fixed column order; floats in shortest round-trip form."""
    cols = [traj[c] for c in COLUMNS]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(HEADER + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_trace(path) -> dict:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ValueError(f"{path}: unexpected trace header {header}")
        rows = [r for r in reader if r]
    out = {}
    for k, name in enumerate(COLUMNS):
        dtype = int if name == "cg_iters" else float
        out[name] = np.array([dtype(r[k]) for r in rows], dtype=dtype)
    return out


def write_snapshots(path, traj: Trajectory) -> None:
    data = {repr(float(t)): [float(x) for x in u] for t, u in traj.snapshots}
    Path(path).write_text(json.dumps(data), encoding="utf-8")


def read_snapshots(path) -> list:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return sorted(((float(t), np.array(u, float)) for t, u in data.items()), key=lambda s: s[0])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)  # JSON has no inf/nan
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enums
        return obj.value
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_run(directory, traj: Trajectory, refined: Trajectory | None = None) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_trace(d / "trace.csv", traj)
    write_snapshots(d / "snapshots.json", traj)
    write_json(d / "run.json", {"status": str(traj.status), "dissipated": traj.dissipated, "meta": traj.meta})
    if refined is not None:
        write_trace(d / "trace_refined.csv", refined)
        write_json(d / "run_refined.json", {"status": str(refined.status), "dissipated": refined.dissipated,
                                            "meta": refined.meta})


def load_trajectory(trace_path, run_json=None, snapshots_path=None, threshold: float | None = None,
                    t_end: float | None = None) -> Trajectory:
    """Rebuild a :class:`Trajectory` from a trace CSV.

    Status comes from ``run_json`` when available; otherwise it is inferred
    from the last row (``h >= threshold`` means blow-up, ``t >= t_end`` means
    completed, anything else stalled).
    """
    cols = read_trace(trace_path)
    meta, dissipated = {}, math.nan
    if run_json is not None and Path(run_json).exists():
        info = read_json(run_json)
        status = Status.parse(info["status"])
        meta = info.get("meta", {})
        dissipated = info.get("dissipated", math.nan)
    else:
        t_last, h_last = float(cols["t"][-1]), float(cols["h_norm_sq"][-1])
        if threshold is not None and h_last >= threshold:
            status = Status("BlewUp", t_last)
        elif t_end is not None and t_last >= t_end * (1 - 1e-12):
            status = Status("Completed")
        else:
            status = Status("Stalled", t_last)
    if threshold is not None:
        meta.setdefault("blowup_threshold", threshold)
    snaps = []
    if snapshots_path is not None and Path(snapshots_path).exists():
        snaps = read_snapshots(snapshots_path)
    return Trajectory(cols, snaps, status, dissipated, meta)
