"""Inner-product tables, negativity certificates and a small perturbation sweep.

    python demos/inner_product_tables.py [--delta 1e-3]
"""

import argparse
import time

from vortexspec.innerprod import (compute_J_table, compute_K_table, negativity_certificate,
                                  perturbation_sweep, quadratic_form_check)
from vortexspec.vortex import solve_vortex


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--delta", type=float, default=1e-3)
    args = ap.parse_args()

    t0 = time.perf_counter()
    for m in (1, 2, 3):
        prof = solve_vortex(m)
        K = compute_K_table(m, profile=prof)
        J = compute_J_table(m, profile=prof)
        cert = negativity_certificate(m, K, J)
        print(f"m={m}")
        for t in (K, J):
            print(f"  {t.family}: v1={t.v1:+.7g}  v2={t.v2:+.7g}  v3={t.v3:+.7g}  det={t.det:+.7g}"
                  f"  symmetry={t.symmetry_defect:.1e}")
        qf = quadratic_form_check(K)
        print(f"  <L1 W1, W1>: via source {qf['via_source']:+.6g}, assembled {qf['assembled']:+.6g},"
              f" boundary flux {qf['boundary_flux']:+.2e}")
        print(f"  H1 negative definite: {cert.h1_matrix_negative_definite}"
              f" (trace {cert.h1_trace:+.6g}, det {cert.h1_det:+.6g});"
              f" H2(Zhat, Zhat) = {cert.h2_zhat_value:+.6g}")
    print(f"tables for m=1..3 in {time.perf_counter() - t0:.1f} s")

    entries, drift = perturbation_sweep(1, [args.delta])
    print(f"\nm=1, delta={args.delta:g}: indices {[e.indices for e in entries]}")
    for name, d in drift.items():
        print(f"  drift {name:6s} {d:.2e}")


if __name__ == "__main__":
    main()
