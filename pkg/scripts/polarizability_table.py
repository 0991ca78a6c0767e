"""Polarizability volumes of a silicon needle and the same-mass sphere.

    python scripts/polarizability_table.py --length 795e-9 --diameter 108e-9
"""
import argparse
import math

from nanorotor.optics import (
    Material, RodGeometry, needle_polarizability, orientation_averaged_polarizability,
    sphere_polarizability, to_angstrom3,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--length", type=float, default=795e-9)
    ap.add_argument("--diameter", type=float, default=108e-9)
    ap.add_argument("--epsilon-r", type=float, default=12.1)
    args = ap.parse_args()

    geom, mat = RodGeometry(args.length, args.diameter), Material(args.epsilon_r)
    pol = needle_polarizability(geom, mat)
    sphere = sphere_polarizability(geom.volume, mat)
    rows = [
        ("alpha_par", pol.alpha_par),
        ("alpha_perp", pol.alpha_perp),
        ("3-D orientation average", orientation_averaged_polarizability(pol, "isotropic3d")),
        ("planar average", orientation_averaged_polarizability(pol, "planar")),
        ("same-mass sphere", sphere),
    ]
    print(f"L = {geom.length * 1e9:.0f} nm, D = {geom.diameter * 1e9:.0f} nm, eps_r = {mat.epsilon_r}")
    for name, a in rows:
        print(f"  {name:<26s} {to_angstrom3(a):.3e} A^3")
    ratio = orientation_averaged_polarizability(pol, "planar") / sphere
    print(f"  planar / sphere            {ratio:.3f}")
    print(f"  trap frequency ratio       {math.sqrt(ratio):.3f}  (sqrt of the above)")


if __name__ == "__main__":
    main()
