"""Truncated self-similar profiles: mass, energy and truncation residual against b.

The residual and the energy of the truncated profiles shrink roughly like
exp(-c / b); the script fits log-values against 1/b and reports the slopes.

    python demos/selfsim_trends.py [--m 1] [--eta 0.1]
"""

import argparse

import numpy as np
from scipy.stats import linregress

from vortexspec.selfsim import SelfSimilarParams, mass_derivative_dm, solve_selfsim
from vortexspec.vortex import mass, solve_vortex


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=1)
    ap.add_argument("--eta", type=float, default=0.1)
    args = ap.parse_args()

    vortex = solve_vortex(args.m)
    bs = np.array([0.05, 0.08, 0.1, 0.15])
    print(f"vortex mass {mass(vortex):.6f}")
    print("   b      R_b      mass        energy      residual")
    energies, residuals = [], []
    for b in bs:
        prof = solve_selfsim(SelfSimilarParams(args.m, float(b), args.eta), profile=vortex)
        energies.append(abs(prof.energy))
        residuals.append(prof.residual_norms["total_r0"])
        print(f"{b:5.2f}  {prof.params.R_b:7.3f}  {prof.mass:9.5f}  {prof.energy:11.3e}  {residuals[-1]:11.3e}")
    for name, vals in (("energy", energies), ("residual", residuals)):
        fit = linregress(1.0 / bs, np.log(vals))
        print(f"log {name:8s} vs 1/b: slope {fit.slope:+.3f}, R^2 {fit.rvalue ** 2:.4f}")

    d_quad, d_fd = mass_derivative_dm(args.m, eta=args.eta, profile=vortex)
    print(f"\nd mass / d b^2 at b=0: quadrature {d_quad:.5g}, finite difference {d_fd:.5g}")


if __name__ == "__main__":
    main()
