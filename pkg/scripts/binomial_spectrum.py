"""Dimension spectrum of a Bernoulli measure on the full tent map vs the closed form."""
import argparse

import numpy as np

from intervalmfa.hofbauer import build_tower
from intervalmfa.inducing import build_scheme_type_a
from intervalmfa.map_model import Potential, tent
from intervalmfa.spectra import binomial_spectrum, dimension_spectrum
from intervalmfa.thermo import InducedData, InducedPressure


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=float, default=0.3)
    ap.add_argument("--qmin", type=float, default=-4.0)
    ap.add_argument("--qmax", type=float, default=4.0)
    ap.add_argument("--steps", type=int, default=81)
    args = ap.parse_args()

    f = tent(1.0)
    phi = Potential.bernoulli(args.p)
    sch = build_scheme_type_a(build_tower(f), 0, (0.0, 1.0), tau_cap=1)
    q = np.linspace(args.qmin, args.qmax, args.steps)
    spec, _ = dimension_spectrum(InducedPressure(InducedData.from_scheme(sch, phi)), q, scheme=sch, phi=phi)
    a, d = binomial_spectrum(args.p, q)
    o = np.argsort(a)
    print("alpha,DS,DS_exact")
    for x, y, z in zip(spec.alpha, spec.DS, d[o]):
        print(f"{x:.8f},{y:.8f},{z:.8f}")
    print(f"# sup |alpha err| = {np.max(np.abs(spec.alpha - a[o])):.2e}, sup |DS err| = {np.max(np.abs(spec.DS - d[o])):.2e}")
    for k, v in sorted(spec.landmarks.items()):
        print(f"# {k} = {v:.8f}")


if __name__ == "__main__":
    main()
