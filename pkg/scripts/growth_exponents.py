"""Large-time growth of ||S(t) v|| for random charts in d=2 against mu = (N + N* + 2)/2."""
import argparse

import numpy as np

from asympheat import heatflow as hf
from asympheat.spaces import AsymptoticChart, AsymptoticFunction, NormSpec, RemainderField, n_star
from asympheat.sphere import SphereFunction, mode_count


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=2)
    ap.add_argument("--p", type=float, default=4.0)
    ap.add_argument("--m", type=int, default=0, help="derivative order of the norm")
    ap.add_argument("--samples", type=int, default=3)
    ap.add_argument("--n", type=int, default=513)
    ap.add_argument("--half-width", type=float, default=64.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    d, L = 2, 3
    Ns = n_star(args.N, d, args.p)
    g = RemainderField.box(d, args.n, args.half_width)
    x, y = g.mesh()
    samples = []
    for _ in range(args.samples):
        coeffs = [SphereFunction(d, L, rng.normal(size=mode_count(d, L))) for _ in range(Ns + 1)]
        chart = AsymptoticChart(d, 0, args.N, Ns, coeffs, args.p)
        samples.append(AsymptoticFunction(chart, g.like(np.exp(-((x - rng.normal()) ** 2 + y**2) / 2))))
    spec = NormSpec("A_asymptotic", args.m, args.p, n=0, N=args.N, N_star=Ns)
    times = [1.0, 2.0, 4.0, 8.0, 16.0]
    out = hf.growth_bound_harness(samples, spec, times)
    print(f"N={args.N} N*={Ns} p={args.p} m={args.m}")
    for t, w in zip(times, out["worst"]):
        print(f"  t={t:6.2f}  worst ratio {w:.4e}")
    print(f"fitted exponent {out['exponent']:.3f}, reference {out['reference_exponent']:.3f}, "
          f"{'within' if out['passed'] else 'above'} bound")


if __name__ == "__main__":
    main()
