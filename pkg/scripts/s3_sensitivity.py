"""How sensitive is the rotation-translation coupling case to its inputs?

Scans phi(0) and eps_r around the bundled values and reports how often the
exit ratios land in the bands f_rot 1.04-1.10 and v_z 0.62-0.70.

    python scripts/s3_sensitivity.py --n 41 --jobs 4
"""
import argparse
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from nanorotor.config import bundled, load
from nanorotor.dynamics import simulate, transit_summary
from nanorotor.optics import Material

ROT_BAND, VEL_BAND = (1.04, 1.10), (0.62, 0.70)


def run(args):
    phi0, eps = args
    base = load(bundled("s3")).simulation
    cfg = replace(base, initial=replace(base.initial, phi=phi0), material=Material(eps))
    s = transit_summary(simulate(cfg))
    return phi0, eps, s.rotation_ratio, s.velocity_ratio


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=21, help="points per axis")
    ap.add_argument("--dphi", type=float, default=1e-3, help="half range of phi(0) [rad]")
    ap.add_argument("--deps", type=float, default=0.5, help="half range of eps_r")
    ap.add_argument("--jobs", type=int, default=None)
    args = ap.parse_args()

    phis = -0.10098 + np.linspace(-args.dphi, args.dphi, args.n)
    epss = 12.1 + np.linspace(-args.deps, args.deps, args.n)
    grid = [(p, e) for p in phis for e in epss]
    with ProcessPoolExecutor(args.jobs) as pool:
        res = list(pool.map(run, grid, chunksize=4))
    rot = np.array([r[2] for r in res])
    vel = np.array([r[3] for r in res])
    hit = (rot >= ROT_BAND[0]) & (rot <= ROT_BAND[1]) & (vel >= VEL_BAND[0]) & (vel <= VEL_BAND[1])
    print(f"{len(res)} runs, {hit.sum()} inside both bands ({hit.mean():.1%})")
    print(f"f_rot ratio: median {np.median(rot):.3f}, 10-90% {np.percentile(rot, 10):.3f}-{np.percentile(rot, 90):.3f}")
    print(f"v_z ratio  : median {np.median(vel):.3f}, 10-90% {np.percentile(vel, 10):.3f}-{np.percentile(vel, 90):.3f}")
    for p, e, r, v in (res[i] for i in np.flatnonzero(hit)):
        print(f"  in band: phi0 {p:.6f}, eps_r {e:.3f} -> {r:.3f} / {v:.3f}")


if __name__ == "__main__":
    main()
