"""Pole catalog along rays for a grid of initial values y(0), y'(0) = 0."""

import argparse
import json
import time

import numpy as np

from p1normal.charts import P1Point
from p1normal.integrator import IntegratorConfig, PathSpec, default_series, pole_map


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=9, help="grid points in Re y(0)")
    ap.add_argument("--lo", type=float, default=-1.0)
    ap.add_argument("--hi", type=float, default=1.0)
    ap.add_argument("--theta", type=float, default=0.0)
    ap.add_argument("--length", type=float, default=3.0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=None, help="write the full catalog as JSON")
    args = ap.parse_args()

    cfg = IntegratorConfig()
    nf = default_series(cfg)
    grid = [P1Point(0, complex(y0), 0) for y0 in np.linspace(args.lo, args.hi, args.n)]
    t0 = time.perf_counter()
    cells = pole_map(grid, PathSpec(theta=args.theta, length=args.length), nf, cfg, workers=args.workers)
    print(f"# {len(cells)} cells in {time.perf_counter() - t0:.1f}s")
    for ic, cell in zip(grid, cells):
        if cell["status"] == "error":
            print(f"y0={ic.y.real:+.3f}  error: {cell['error']}")
            continue
        ps = [complex(*p["p"]) for p in cell["catalog"]["poles"]]
        print(f"y0={ic.y.real:+.3f}  poles: " + ", ".join(f"{p.real:.10f}{p.imag:+.10f}j" for p in ps))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(cells, fh, indent=1)


if __name__ == "__main__":
    main()
