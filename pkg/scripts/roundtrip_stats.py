"""Synthesize-then-analyse error statistics over random free flights.

    python scripts/roundtrip_stats.py --n 50 --vz-min 0.3
"""
import argparse
import math

import numpy as np

from nanorotor.analysis import extract_kinematics
from nanorotor.dynamics import RodState, SimulationConfig, Trajectory
from nanorotor.optics import CavityParams
from nanorotor.scattering import synthesize_signal


def free_flight(rng, vz_min, vz_max):
    v_x = rng.uniform(8, 14)
    vz = rng.uniform(vz_min, vz_max) * rng.choice([-1, 1])
    f = rng.uniform(1.5e6, 3e6)
    z0, phi0 = rng.uniform(0, 1.56e-6), rng.uniform(0, 2 * math.pi)
    cfg = SimulationConfig(CavityParams(), v_x, RodState(0, z0, vz, phi0, 2 * math.pi * f))
    t0, t1 = cfg.span
    t = np.linspace(t0, t1, int((t1 - t0) / 2e-9) + 1)
    tau = t - t0
    return Trajectory(cfg, t, z0 + vz * tau, np.full_like(t, vz), phi0 + 2 * math.pi * f * tau,
                      np.full_like(t, 2 * math.pi * f))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--vz-min", type=float, default=0.3)
    ap.add_argument("--vz-max", type=float, default=0.8)
    ap.add_argument("--sample-rate", type=float, default=130e6)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    errs = []
    for _ in range(args.n):
        tr = free_flight(rng, args.vz_min, args.vz_max)
        est = extract_kinematics(synthesize_signal(tr, args.sample_rate), tr.config.cavity)
        s = tr[0]
        errs.append((abs(s.z_dot), est.v_x / tr.config.v_x - 1, est.v_z / abs(s.z_dot) - 1, est.f_rot / s.f_rot - 1))
    e = np.array(errs)
    for j, name in enumerate(["v_x", "v_z", "f_rot"], 1):
        worst = int(np.argmax(np.abs(e[:, j])))
        print(f"{name:<6} max |rel err| {abs(e[worst, j]):.2e} (at |v_z| = {e[worst, 0]:.3f} m/s), "
              f"median {np.median(np.abs(e[:, j])):.2e}")


if __name__ == "__main__":
    main()
