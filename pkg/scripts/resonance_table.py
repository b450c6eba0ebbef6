"""k = 6 compatibility for polynomial forcings: normal form vs Laurent test."""

import argparse

from p1normal.normal_form import Forcing, painleve_test, resonance_residual


def coeffs(p):
    """Coefficients in ascending powers of the expansion point."""
    return ", ".join(map(str, p.coeffs)) or "0"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("forcings", nargs="*", default=["0", "1", "x", "2x+1", "x^2", "x^3", "x^2-x"])
    args = ap.parse_args()

    print(f"{'f':>8}  {'h_6,0 (normal form)':<28}  {'Laurent residual':<24}  agree")
    for text in args.forcings:
        f = Forcing.parse(text)
        nf = resonance_residual(f)
        cl = painleve_test(f)
        print(f"{text:>8}  {coeffs(nf.compatibility_residual):<28}  {coeffs(cl.resonance_residual):<24}  {nf.passes == cl.passes}")


if __name__ == "__main__":
    main()
