"""The three stages (simulate, synth, analyze) as file-producing functions,
plus the sweep runner. The CLI is a thin shell over these."""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, io
from .config import RunConfig, SweepSpec, dump, serialize
from .dynamics import Trajectory, simulate, transit_summary
from .scattering import SignalTrace, normalize_signal, synthesize_signal

RUN_CONFIG = "run.cfg"
TRAJECTORY = "trajectory.csv"
SUMMARY = "summary.json"
SIGNAL = "signal.csv"
KINEMATICS = "kinematics.json"
RECONSTRUCTION = "reconstruction.csv"
RATES = "rate.csv"


@dataclass
class StageResult:
    files: list[Path]
    record: dict
    warnings: list[str] = field(default_factory=list)


def summary_record(traj: Trajectory) -> dict:
    s = transit_summary(traj)
    return {
        "v_z_in": s.v_z_in,
        "v_z_out": s.v_z_out,
        "f_rot_in": s.f_rot_in,
        "f_rot_out": s.f_rot_out,
        "rotation_ratio": s.rotation_ratio,
        "velocity_ratio": s.velocity_ratio,
        "channelled": s.channelled,
        "n_antinode_hops": s.n_antinode_hops,
        "trap_frequency": s.trap_frequency,
    }


def run_simulate(cfg: RunConfig, out: Path) -> tuple[Trajectory, StageResult]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    dump(cfg, out / RUN_CONFIG)
    traj = simulate(cfg.simulation)
    io.write_trajectory(out / TRAJECTORY, traj)
    record = summary_record(traj)
    io.write_json(out / SUMMARY, {"summary": record, "provenance": io.provenance(cfg.hash())})
    return traj, StageResult([out / RUN_CONFIG, out / TRAJECTORY, out / SUMMARY], record)


def add_noise(trace: SignalTrace, rms: float, seed: int | None) -> SignalTrace:
    """Deterministic white-noise hook for analysis tests (not a detector model)."""
    rng = np.random.default_rng(0 if seed is None else seed)
    noisy = trace.samples + rng.normal(0.0, rms, trace.samples.size)
    return normalize_signal(noisy, 1.0, trace.sample_rate, trace.t0)


def run_synth(traj: Trajectory, cfg: RunConfig, out: Path) -> tuple[SignalTrace, StageResult]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    trace = synthesize_signal(traj, cfg.sample_rate, cfg.y_offset)
    if cfg.noise_rms > 0:
        trace = add_noise(trace, cfg.noise_rms, cfg.seed)
    side = io.write_signal(out / SIGNAL, trace, io.provenance(cfg.hash()))
    record = {"sample_rate": trace.sample_rate, "t0": trace.t0, "n_samples": len(trace)}
    return trace, StageResult([out / SIGNAL, side], record)


def analyze_trace(trace: SignalTrace, cfg: RunConfig):
    """Run every analysis step that the trace supports.

    Returns ``(record, reconstruction or None, rate series or None, notes)``.
    Steps that cannot run leave a note instead of raising.
    """
    cav = cfg.simulation.cavity
    notes: list[str] = []
    est = analysis.extract_kinematics(trace, cav, cfg.window)
    notes += list(est.warnings)
    record: dict = {"kinematics": est.as_dict(), "envelope": None, "channelling": None, "reconstruction": None}
    rec = None
    if est.v_x is not None:
        try:
            averaged = analysis.rotation_average(trace, est.f_rot) if est.f_rot else trace
            env = analysis.fit_envelope(averaged, cav)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", analysis.ModelMismatchWarning)
                rec = analysis.reconstruct_axial_trajectory(averaged, env, cav, cfg.envelope_threshold)
            notes += [f"reconstruction: {w.message}" for w in caught]
            verdict = analysis.detect_channelling(rec, env)
            record["envelope"] = {
                "v_x": env.v_x, "v_x_sigma": env.v_x_sigma, "t_center": env.t_center,
                "amplitude": env.amplitude, "residual_rms": env.residual_rms,
            }
            record["channelling"] = {
                "channelled": verdict.channelled, "trap_frequency": verdict.trap_frequency,
                "reason": verdict.reason,
            }
            record["reconstruction"] = {
                "node_crossings": rec.node_crossings,
                "antinode_crossings": rec.antinode_crossings,
                "turning_points": rec.turning_points,
            }
        except (analysis.EnvelopeFitError, analysis.ResolutionError, ValueError) as exc:
            notes.append(f"reconstruction: {exc}")
    rates = None
    try:
        rates = analysis.instantaneous_rotation_rate(trace, cfg.min_prominence)
    except analysis.InsufficientMaximaError as exc:
        notes.append(f"rotation rate: {exc}")
    return record, rec, rates, notes


def run_analyze(trace: SignalTrace, cfg: RunConfig, out: Path) -> StageResult:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    record, rec, rates, notes = analyze_trace(trace, cfg)
    if rec is not None:
        io.write_series(out / RECONSTRUCTION, "t,z", rec.t, rec.z)
    else:
        io.write_series(out / RECONSTRUCTION, "t,z", [], [])
    if rates is not None:
        io.write_series(out / RATES, "t,f_rot", rates.t, rates.f_rot)
    else:
        io.write_series(out / RATES, "t,f_rot", [], [])
    io.write_json(out / KINEMATICS, {**record, "warnings": notes, "provenance": io.provenance(cfg.hash())})
    return StageResult([out / KINEMATICS, out / RECONSTRUCTION, out / RATES], record, notes)


# sweeps ------------------------------------------------------------------

def _sweep_task(job):
    index, cfg, params, run_dir = job
    entry = {"index": index, "params": params, "dir": run_dir.name}
    try:
        point = cfg.with_values(params)
        _, res = run_simulate(point, run_dir)
    except Exception as exc:  # any failure is recorded, the sweep goes on
        entry.update(status="error", error=f"{type(exc).__name__}: {exc}")
        return entry
    m = res.record
    entry.update(
        status="ok",
        outputs={"trajectory": f"{run_dir.name}/{TRAJECTORY}", "summary": f"{run_dir.name}/{SUMMARY}"},
        metrics={
            "channelled": m["channelled"],
            "n_antinode_hops": m["n_antinode_hops"],
            "trap_frequency": m["trap_frequency"],
            "rotation_ratio": m["rotation_ratio"],
            "velocity_ratio": m["velocity_ratio"],
        },
    )
    return entry


def run_sweep(spec: SweepSpec, out: Path, jobs: int | None = None) -> dict:
    """Run every combination; failures become manifest entries.

    The manifest lists runs in combination order whatever order they
    finished in, so it is independent of scheduling.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    points = spec.points()
    width = max(4, len(str(len(points) - 1)))
    tasks = [(i, spec.base, p, out / f"run_{i:0{width}d}") for i, p in enumerate(points)]
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1 or len(tasks) == 1:
        entries = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            entries = list(pool.map(_sweep_task, tasks))
    entries.sort(key=lambda e: e["index"])
    manifest = {
        "size": spec.size,
        "cap": spec.cap,
        "axes": {k: list(v) for k, v in spec.axes},
        "base_config": serialize(spec.base),
        "n_failed": sum(e["status"] == "error" for e in entries),
        "runs": entries,
        "provenance": io.provenance(spec.base.hash()),
    }
    io.write_json(out / "manifest.json", manifest)
    return manifest
