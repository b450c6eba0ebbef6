"""Halving |v| should divide the pushforward defect by 2^(K+1).

Prints, for a few |v| bands, the spread of defect(v) / defect(v/2) / 2^(K+1)
over random points of Delta.  Large s-orders are needed so the s-truncation
floor stays below the v^(K+1) term.
"""

import argparse
import cmath
import math

import numpy as np

from p1normal.charts import ChartPoint, RegionParams, pushforward_residual
from p1normal.normal_form import P1, solve_normal_form


def ratios(nf, lo, hi, n, seed, P):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        t = complex(*rng.uniform(-0.7, 0.7, 2))
        v = math.sqrt(rng.uniform(lo**2, hi**2)) * cmath.exp(2j * math.pi * rng.random())
        s = P.eps * math.sqrt(rng.random()) * cmath.exp(2j * math.pi * rng.random())
        a = pushforward_residual(nf, ChartPoint(t, v, 0.25 + s))
        b = pushforward_residual(nf, ChartPoint(t, v / 2, 0.25 + s))
        out.append(a / b / 2 ** (nf.K + 1))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=12)
    ap.add_argument("--N", type=int, nargs="+", default=[30, 60])
    ap.add_argument("--points", type=int, default=20)
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()

    P = RegionParams()
    bands = [(1 / (8 * P.R), 1 / P.R), (1 / (8 * P.R), 1 / (2 * P.R)), (1 / (2 * P.R), 1 / P.R)]
    print("N\t|v| band\tseed\tmin\tmax")
    for N in args.N:
        nf = solve_normal_form(P1, args.K, N)
        for lo, hi in bands:
            for seed in range(args.seeds):
                r = ratios(nf, lo, hi, args.points, seed, P)
                print(f"{N}\t[{lo:.4g}, {hi:.4g})\t{seed}\t{min(r):.3f}\t{max(r):.3f}")


if __name__ == "__main__":
    main()
