"""Replay the bundled transit cases and print their summaries.

    python scripts/replay_cases.py            # s1 s2 s2_sphere s3
    python scripts/replay_cases.py s3 --dt-factor 0.5
"""
import argparse
from dataclasses import replace

from nanorotor.config import bundled, load
from nanorotor.dynamics import simulate, transit_summary


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("cases", nargs="*", default=["s1", "s2", "s2_sphere", "s3"])
    ap.add_argument("--dt-factor", type=float, default=1.0, help="scale the default step")
    args = ap.parse_args()

    print(f"{'case':<10} {'f_rot out/in':>12} {'v_z out/in':>11} {'hops':>5} {'channelled':>11} {'trap [kHz]':>11}")
    for name in args.cases:
        cfg = load(bundled(name)).simulation
        cfg = replace(cfg, dt=cfg.resolved_dt() * args.dt_factor)
        s = transit_summary(simulate(cfg))
        trap = f"{s.trap_frequency / 1e3:.1f}" if s.trap_frequency else "-"
        print(f"{name:<10} {s.rotation_ratio:12.4f} {s.velocity_ratio:11.4f} {s.n_antinode_hops:5d} "
              f"{str(s.channelled):>11} {trap:>11}")


if __name__ == "__main__":
    main()
