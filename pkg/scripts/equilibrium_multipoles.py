"""Solve Delta u = psi u^3 - phi in R^3 and compare its far field with a regression on the potential."""
import argparse

import numpy as np

from asympheat import semilinear as sl
from asympheat.spaces import RemainderField


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=72)
    ap.add_argument("--half-width", type=float, default=8.5)
    ap.add_argument("--psi", type=float, default=0.5, help="amplitude of psi")
    ap.add_argument("--dipole", type=float, default=0.3)
    ap.add_argument("--quadrupole", type=float, default=0.2)
    args = ap.parse_args()

    g = RemainderField.box(3, args.n, args.half_width)
    r2 = g.radius() ** 2
    x, y, z = g.mesh()
    phi = g.like(np.exp(-r2 / 2) * (1 + args.dipole * x + args.quadrupole * y * z))
    psi = g.like(args.psi * np.exp(-r2 / 2))
    prob = sl.SemilinearProblem(phi, psi)
    eq = sl.equilibrium_solve(prob)
    print(f"Newton iterations {eq.iterations}, residual {eq.residual:.2e}")
    print("residual history", " ".join(f"{h:.1e}" for h in eq.residual_history))
    for k, v in eq.purity.items():
        print(f"  a_{k}: norm {v['norm']:.4e}  purity in degree {k - 1}: {v['purity']:.6f}")
    rho = g.like(psi.data * eq.u_star.samples() ** 3 - phi.data)
    fit = sl.far_field_fit(rho)
    print(f"far-field regression misfit {fit['relative_misfit']:.2e}")
    for k in eq.chart.ks:
        a = eq.chart[k].coeffs
        b = fit["coeffs"][k].coeffs[: len(a)]
        print(f"  a_{k}: chart vs regression {np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300):.2e}")
    mp = sl.max_principle_checks(eq, prob)
    print(f"sup u* = {mp['u_sup']:.4f} <= sup |Delta^-1 phi| = {mp['inverse_laplacian_phi_sup']:.4f}: {mp['bound_ok']}")


if __name__ == "__main__":
    main()
