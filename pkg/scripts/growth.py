"""Norms of gamma_k and the fitted geometric growth C R^(k-5) / k^(3/2)."""

import argparse

from p1normal.normal_form import P1, norm_and_growth, solve_normal_form


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=16)
    ap.add_argument("--N", type=int, default=8)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.02, 0.05, 0.1])
    args = ap.parse_args()

    nf = solve_normal_form(P1, args.K, args.N)
    for eps in args.eps:
        g = norm_and_growth(nf, eps)
        print(f"# eps={eps}  {g.summary()}")
        print("k\tnorm\tratio\tbridged")
        for k, n in g.norms.items():
            r = g.ratios.get(k, float("nan"))
            b = g.bridged_ratios.get(k, float("nan"))
            print(f"{k}\t{n:.6e}\t{r:.4g}\t{b:.4g}")


if __name__ == "__main__":
    main()
