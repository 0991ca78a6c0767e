"""CSV and JSON artifacts. Numbers are written with 17 significant digits so
that files round-trip to the same doubles and identical runs give
identical bytes."""
from __future__ import annotations

import json
import math
import platform
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .dynamics import SimulationConfig, Trajectory
from .scattering import SignalTrace

FMT = "%.17g"
TRAJECTORY_HEADER = "t,z,z_dot,phi,phi_dot,envelope"


def _write_csv(path, header: str, columns) -> None:
    data = np.column_stack(columns)
    with open(path, "w", newline="\n") as fh:
        np.savetxt(fh, data, fmt=FMT, delimiter=",", header=header, comments="")


def _read_csv(path, header: str) -> np.ndarray:
    with open(path) as fh:
        first = fh.readline().strip()
        if first != header:
            raise ValueError(f"{path}: expected header {header!r}, found {first!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != header.count(",") + 1:
        raise ValueError(f"{path}: expected {header.count(',') + 1} columns, found {data.shape[1]}")
    return data


def write_trajectory(path, traj: Trajectory) -> None:
    _write_csv(path, TRAJECTORY_HEADER, [traj.t, traj.z, traj.z_dot, traj.phi, traj.phi_dot, traj.envelope])


def read_trajectory(path, config: SimulationConfig) -> Trajectory:
    """Load a trajectory CSV; ``config`` supplies everything the file does
    not record (cavity, geometry, v_x)."""
    d = _read_csv(path, TRAJECTORY_HEADER)
    return Trajectory(config, *(d[:, i].copy() for i in range(5)))


def write_signal(path, trace: SignalTrace, provenance: dict | None = None) -> Path:
    """Write ``t,s_n`` and a JSON sidecar next to it; returns the sidecar path."""
    path = Path(path)
    _write_csv(path, "t,s_n", [trace.times, trace.samples])
    side = path.with_suffix(".json")
    write_json(side, {
        "sample_rate": trace.sample_rate,
        "t0": trace.t0,
        "n_samples": len(trace),
        "averaging_window": trace.averaging_window,
        "provenance": provenance or {},
    })
    return side


def read_signal(path) -> SignalTrace:
    """Load a ``t,s_n`` trace. Sample rate and start time come from the JSON
    sidecar when present, otherwise from the (uniform) time column."""
    path = Path(path)
    d = _read_csv(path, "t,s_n")
    t, s = d[:, 0], d[:, 1]
    side = path.with_suffix(".json")
    if side.exists():
        meta = json.loads(side.read_text())
        return SignalTrace(float(meta["sample_rate"]), float(meta["t0"]), s, meta.get("averaging_window"))
    if t.size < 2:
        raise ValueError(f"{path}: need two samples to infer the sample rate")
    steps = np.diff(t)
    dt = float(np.mean(steps))
    if np.max(np.abs(steps - dt)) > 1e-6 * abs(dt):
        raise ValueError(f"{path}: time column is not uniformly spaced")
    return SignalTrace(1.0 / dt, float(t[0]), s)


def write_series(path, header: str, t, values) -> None:
    _write_csv(path, header, [np.asarray(t), np.asarray(values)])


def jsonable(obj):
    """Plain JSON types; non-finite floats become None."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n")


def provenance(config_hash: str | None) -> dict:
    """Config hash plus the software versions that produced an artifact.
    Deliberately free of timestamps and host names."""
    return {
        "config_hash": config_hash,
        "versions": {
            "nanorotor": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
