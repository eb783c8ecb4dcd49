"""Picard contraction factor against the weight k of the e^{-kt} norm (expected ~ 1/k)."""
import argparse

import numpy as np

from asympheat import semilinear as sl
from asympheat.checks import picard_problem


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--weights", type=float, nargs="+", default=[5, 10, 20, 40])
    ap.add_argument("--T", type=float, default=2.0)
    ap.add_argument("--dt", type=float, default=0.02)
    ap.add_argument("--n", type=int, default=384)
    args = ap.parse_args()

    v, prob = picard_problem(n=args.n)
    prev = None
    for k in args.weights:
        res = sl.picard_iterate(v, prob, args.T, k, dt=args.dt, max_iter=4)
        f = float(np.mean(res.factors[:3]))
        ratio = "" if prev is None else f"  ratio to previous {prev / f:.2f}"
        print(f"k={k:6.1f}  factor {f:.4e}  k*factor {k * f:.4f}{ratio}")
        prev = f


if __name__ == "__main__":
    main()
