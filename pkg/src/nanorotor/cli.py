"""Command line entry point.

Exit status: 0 on success (also with warnings), 1 on a runtime failure,
2 on a usage or configuration error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__, io
from .config import ConfigError, RunConfig, load, load_sweep
from .pipeline import RUN_CONFIG, run_analyze, run_simulate, run_sweep, run_synth

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def g4(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return f"{x:.4g}"
    return str(x)


def _say(*lines):
    for line in lines:
        print(line)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    values = {}
    if getattr(args, "dt", None) is not None:
        values["dt"] = args.dt
    if getattr(args, "sample_rate", None) is not None:
        values["synth.sample_rate"] = args.sample_rate
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    if not values:
        return cfg
    try:
        return cfg.with_values(values)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_config(path) -> RunConfig:
    if path is None:
        raise UsageError("--config is required")
    try:
        return load(path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None


def _out_dir(args, cfg: RunConfig | None, fallback: Path) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.out_dir:
        return Path(cfg.out_dir)
    return fallback


def _sibling_config(args, data_path: Path) -> RunConfig | None:
    """Explicit --config, else the run.cfg written next to the input."""
    if args.config:
        return _load_config(args.config)
    guess = data_path.parent / RUN_CONFIG
    return load(guess) if guess.exists() else None


def _print_summary(rec: dict):
    _say(
        f"v_z in/out   : {g4(rec['v_z_in'])} / {g4(rec['v_z_out'])} m/s  (ratio {g4(rec['velocity_ratio'])})",
        f"f_rot in/out : {g4(rec['f_rot_in'])} / {g4(rec['f_rot_out'])} Hz  (ratio {g4(rec['rotation_ratio'])})",
        f"channelled   : {g4(rec['channelled'])}  hops {rec['n_antinode_hops']}  trap frequency {g4(rec['trap_frequency'])} Hz",
    )


def _print_analysis(res):
    k = res.record["kinematics"]
    _say(
        f"v_x   : {g4(k['v_x'])} +- {g4(k['v_x_sigma'])} m/s",
        f"v_z   : {g4(k['v_z'])} +- {g4(k['v_z_sigma'])} m/s",
        f"f_rot : {g4(k['f_rot'])} +- {g4(k['f_rot_sigma'])} Hz",
    )
    ch = res.record.get("channelling")
    if ch:
        _say(f"channelled: {g4(ch['channelled'])}  trap frequency {g4(ch['trap_frequency'])} Hz")
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    out = _out_dir(args, cfg, Path("out"))
    _, res = run_simulate(cfg, out)
    _print_summary(res.record)
    _say(f"wrote {', '.join(str(p) for p in res.files)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    traj_path = Path(args.trajectory)
    cfg = _sibling_config(args, traj_path)
    if cfg is None:
        raise UsageError(f"no --config given and no {RUN_CONFIG} next to {traj_path}")
    cfg = _apply_overrides(cfg, args)
    traj = io.read_trajectory(traj_path, cfg.simulation)
    out = _out_dir(args, None, traj_path.parent)
    trace, res = run_synth(traj, cfg, out)
    _say(f"{len(trace)} samples at {g4(trace.sample_rate)} Hz", f"wrote {', '.join(str(p) for p in res.files)}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    sig_path = Path(args.signal)
    cfg = _sibling_config(args, sig_path)
    if cfg is None:  # standard cavity, v_x is a dummy never used by analysis
        cfg = RunConfig.from_flat({"v_x": 1.0})
    cfg = _apply_overrides(cfg, args)
    trace = io.read_signal(sig_path)
    out = _out_dir(args, None, sig_path.parent)
    res = run_analyze(trace, cfg, out)
    _print_analysis(res)
    _say(f"wrote {', '.join(str(p) for p in res.files)}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    out = _out_dir(args, cfg, Path("out"))
    traj, sim = run_simulate(cfg, out)
    _print_summary(sim.record)
    trace, _ = run_synth(traj, cfg, out)
    res = run_analyze(trace, cfg, out)
    _print_analysis(res)
    _say(f"wrote outputs to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        spec = load_sweep(args.spec)
    except OSError as exc:
        raise UsageError(f"cannot read sweep spec {args.spec}: {exc.strerror}") from None
    out = _out_dir(args, spec.base, Path("sweep_out"))
    manifest = run_sweep(spec, out, args.jobs)
    for e in manifest["runs"]:
        params = ", ".join(f"{k}={g4(v)}" for k, v in e["params"].items())
        if e["status"] == "ok":
            m = e["metrics"]
            _say(f"[{e['index']}] {params}: channelled {g4(m['channelled'])}, trap {g4(m['trap_frequency'])} Hz, "
                 f"ratios {g4(m['rotation_ratio'])} / {g4(m['velocity_ratio'])}")
        else:
            _say(f"[{e['index']}] {params}: FAILED {e['error']}")
    _say(f"{manifest['size']} runs, {manifest['n_failed']} failed; manifest {out / 'manifest.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nanorotor", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="run configuration (key = value file)")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("simulate", help="integrate one transit")
    common(sp)
    sp.add_argument("--dt", type=float, help="override the integration step [s]")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("synth", help="scattering trace from a trajectory CSV")
    sp.add_argument("trajectory")
    common(sp)
    sp.add_argument("--sample-rate", type=float, help="override the sample rate [Hz]")
    sp.add_argument("--seed", type=int, help="seed for the optional noise hook")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("analyze", help="kinematics, reconstruction and rotation rate from a trace")
    sp.add_argument("signal")
    common(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("pipeline", help="simulate, synth and analyze in one go")
    common(sp)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--sample-rate", type=float)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("sweep", help="run a parameter sweep")
    sp.add_argument("spec")
    common(sp, config=False)
    sp.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad usage
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"nanorotor {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"nanorotor {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
