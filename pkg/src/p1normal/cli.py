"""Command-line entry points.

Exit codes: 0 ok, 1 invariant failure, 2 mathematical obstruction, 3 usage
error.  Every option can also be set through the environment as
P1NF_<COMMAND>_<OPTION> (e.g. P1NF_COEFFS_K=12); explicit flags win.
"""

from __future__ import annotations

import math
import sys

import click
import numpy as np

from . import io
from .charts import ChartPoint, P1Point, RegionParams, gamma_map, pushforward_residual
from .integrator import IntegratorConfig, PathSpec, pole_map, run_path
from .normal_form import (
    Forcing,
    ObstructionError,
    divisor,
    norm_and_growth,
    painleve_test,
    residual_pde,
    resonance_residual,
    solve_normal_form,
)
from .series import w_series

ENV_PREFIX = "P1NF"
EXIT_OK, EXIT_INVARIANT, EXIT_OBSTRUCTION, EXIT_USAGE = 0, 1, 2, 3


class Complex(click.ParamType):
    name = "complex"

    def convert(self, value, param, ctx):
        if isinstance(value, complex):
            return value
        try:
            return complex(str(value).replace(" ", "").replace("i", "j"))
        except ValueError:
            self.fail(f"{value!r} is not a complex number (use e.g. 1+2j)", param, ctx)


class ForcingType(click.ParamType):
    name = "forcing"

    def convert(self, value, param, ctx):
        if isinstance(value, Forcing):
            return value
        try:
            return Forcing.parse(value)
        except ValueError as exc:
            self.fail(str(exc), param, ctx)


COMPLEX = Complex()
FORCING = ForcingType()


def _kv(key, value):
    click.echo(f"{key}={value}")


def _load_or_solve(series, K, N):
    if series:
        return io.load_series(series)
    return solve_normal_form(Forcing((0, 1)), K, N)


@click.group(context_settings={"auto_envvar_prefix": ENV_PREFIX, "show_default": True})
def cli():
    """Normal form of y'' = 6y^2 + x near its poles."""


@cli.command()
@click.option("--forcing", type=FORCING, default="x", help="polynomial f in y'' = 6y^2 + f(x)")
@click.option("--K", "K", type=click.IntRange(min=5), default=8, help="order in v")
@click.option("--N", "N", type=click.IntRange(min=1), default=4, help="order in s = w - 1/4")
@click.option("--x0", default="0", help="rational expansion center")
@click.option("--gauge", default="0", help="value of the free coefficient gamma_{7,0}")
@click.option("--out", type=click.Path(dir_okay=False), default="series.json")
def coeffs(forcing, K, N, x0, gauge, out):
    """Solve for gamma, eta, theta and write a series file."""
    from fractions import Fraction

    try:
        x0, gauge = Fraction(x0), Fraction(gauge)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc
    report = resonance_residual(forcing, N=min(N, 2), x0=x0)
    click.echo(report.summary())
    try:
        nf = solve_normal_form(forcing, K, N, gauge=gauge, x0=x0)
    except ObstructionError as exc:
        click.echo(str(exc), err=True)
        return EXIT_OBSTRUCTION
    bad = [k for k, g in nf.gammas.items() if g.t_degree > (k - 1) // 4]
    _kv("deg_bound", "ok" if not bad else f"fail{bad}")
    io.save_series(nf, out)
    _kv("written", out)
    return EXIT_OK if not bad else EXIT_INVARIANT


def _check_series(nf, eps, pushforward, points, seed):
    """Yield (key, value, ok) triples."""
    res = residual_pde(nf)
    low = {k: w for k, w in res.coeffs.items() if k <= nf.K and w}
    yield "pde_residual", "0 exact" if not low else f"nonzero at v^{min(low)}", not low
    bad = [k for k, g in nf.gammas.items() if g.t_degree > (k - 1) // 4]
    yield "deg_bound", "ok" if not bad else f"fail{bad}", not bad
    K = nf.K
    ident = (nf.theta * nf.eta * nf.eta).truncate(K) == (nf.gamma.monomial(2, K, nf.N) * w_series(nf.N)).truncate(K)
    yield "theta_eta2_identity", "ok" if ident else "fail", ident
    inv = (nf.eta * nf.Lgamma).truncate(K) == nf.gamma.monomial(1, K, nf.N)
    yield "eta_Lgamma_identity", "ok" if inv else "fail", inv
    zeros = [(k, n) for k in range(4, K + 1) for n in range(nf.N + 1) if divisor(k, n) == 0]
    yield "resonances", zeros, zeros == [(6, 0)]
    g = norm_and_growth(nf, eps)
    finite = all(math.isfinite(r) for r in g.bridged_ratios.values())
    yield "growth_C", f"{g.C:.6g}", True
    yield "growth_R", f"{g.R:.6g}", True
    yield "growth_max_bridged_ratio", f"{max(g.bridged_ratios.values()):.6g}", finite
    if pushforward:
        rng = np.random.default_rng(seed)
        R = RegionParams().R
        ratios = []
        for _ in range(points):
            t = complex(*rng.uniform(-0.7, 0.7, 2))
            # |v| in [1/8R, 1/2R): v/2 stays above roundoff, v below the next-order term
            v = math.sqrt(rng.uniform((1 / (8 * R)) ** 2, (1 / (2 * R)) ** 2)) * np.exp(2j * np.pi * rng.random())
            s = eps * math.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
            a = pushforward_residual(nf, ChartPoint(t, v, 0.25 + s))
            b = pushforward_residual(nf, ChartPoint(t, v / 2, 0.25 + s))
            ratios.append(a / b / 2 ** (K + 1))
        ok = all(0.75 <= r <= 1.25 for r in ratios)
        yield "pushforward_ratio_range", f"{min(ratios):.4f}..{max(ratios):.4f}", ok


@cli.command()
@click.option("--series", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--eps", type=click.FloatRange(0, 0.25, min_open=True, max_open=True), default=0.05)
@click.option("--pushforward/--no-pushforward", default=False, help="also run the order-scaling test (needs large N)")
@click.option("--points", type=click.IntRange(min=1), default=8)
@click.option("--seed", type=int, default=0)
def verify(series, eps, pushforward, points, seed):
    """Check the invariants of a series file; exit 1 on any failure."""
    try:
        nf = io.load_series(series)
    except io.SchemaError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INVARIANT
    ok = True
    for key, value, good in _check_series(nf, eps, pushforward, points, seed):
        _kv(key, value)
        ok &= bool(good)
    _kv("status", "ok" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_INVARIANT


@cli.command("map")
@click.option("--series", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--K", "K", type=click.IntRange(min=5), default=12)
@click.option("--N", "N", type=click.IntRange(min=1), default=6)
@click.option("--t", "base", type=COMPLEX, required=True, help="t (or x with --inverse)")
@click.option("--v", type=COMPLEX, required=True)
@click.option("--w", type=COMPLEX, default="0.25")
@click.option("--inverse", is_flag=True, help="evaluate Gamma^-1 instead")
def map_(series, K, N, base, v, w, inverse):
    """Evaluate Gamma (or its inverse) at one point."""
    nf = _load_or_solve(series, K, N)
    gm = gamma_map(nf)
    if inverse:
        c = gm.invert(ChartPoint(base, v, w))
        out = (c.base, c.v, c.w)
    else:
        out = tuple(complex(z) for z in gm(base, v, w))
    for key, z in zip(("base", "v", "w"), out):
        _kv(key, f"{z.real:.17g}{z.imag:+.17g}j")
    return EXIT_OK


def _config(eps1, rtol, K, N):
    return IntegratorConfig(eps1=eps1, rtol=rtol, K=K, N=N)


@cli.command()
@click.option("--series", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--K", "K", type=click.IntRange(min=5), default=12)
@click.option("--N", "N", type=click.IntRange(min=1), default=6)
@click.option("--x0", type=COMPLEX, default="0")
@click.option("--y0", type=COMPLEX, required=True)
@click.option("--yp0", type=COMPLEX, required=True)
@click.option("--theta", type=float, default=0.0, help="ray angle")
@click.option("--length", type=click.FloatRange(min=0, min_open=True), default=1.0)
@click.option("--eps1", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=1e-3)
@click.option("--rtol", type=float, default=1e-13)
@click.option("--detour", type=click.Choice(["elliptic", "upper", "lower"]), default="elliptic")
@click.option("--trace-out", type=click.Path(dir_okay=False), default="trace.tsv")
@click.option("--catalog-out", type=click.Path(dir_okay=False), default="catalog.json")
def integrate(series, K, N, x0, y0, yp0, theta, length, eps1, rtol, detour, trace_out, catalog_out):
    """Integrate P1 along a ray, continuing through poles."""
    nf = _load_or_solve(series, K, N)
    if nf.forcing != Forcing((0, 1)):
        raise click.BadParameter("series file must be for forcing x", param_hint="--series")
    cfg = _config(eps1, rtol, nf.K, nf.N)
    tr = run_path(P1Point(x0, y0, yp0), PathSpec(start=x0, theta=theta, length=length, detour=detour), nf, cfg)
    io.write_trace(tr, trace_out)
    io.write_catalog(tr.catalog.to_dict(), catalog_out)
    for i, rec in enumerate(tr.poles):
        click.echo(f"pole {i}: p={rec.p.real:.15g}{rec.p.imag:+.15g}j K1={rec.K1.real:.6g}{rec.K1.imag:+.6g}j residual={rec.residual_check:.3e}")
    _kv("poles", len(tr.poles))
    _kv("status", tr.status)
    _kv("drift", f"{tr.drift():.3e}")
    return EXIT_OK


def _range(spec: str):
    try:
        lo, hi, n = spec.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError as exc:
        raise click.BadParameter(f"expected lo:hi:n, got {spec!r}") from exc


@cli.command()
@click.option("--series", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--K", "K", type=click.IntRange(min=5), default=12)
@click.option("--N", "N", type=click.IntRange(min=1), default=6)
@click.option("--x0", type=COMPLEX, default="0")
@click.option("--yp0", type=COMPLEX, default="0")
@click.option("--y0-re", default="-1:1:3", help="lo:hi:n grid of Re y0")
@click.option("--y0-im", default="0:0:1", help="lo:hi:n grid of Im y0")
@click.option("--theta", type=float, default=0.0)
@click.option("--length", type=click.FloatRange(min=0, min_open=True), default=1.0)
@click.option("--eps1", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=1e-3)
@click.option("--workers", type=click.IntRange(min=1), default=1)
@click.option("--out", type=click.Path(dir_okay=False), default="poles.json")
def poles(series, K, N, x0, yp0, y0_re, y0_im, theta, length, eps1, workers, out):
    """Pole catalogs over a grid of initial values y(x0)."""
    nf = _load_or_solve(series, K, N)
    grid = [P1Point(x0, complex(a, b), yp0) for b in _range(y0_im) for a in _range(y0_re)]
    cells = pole_map(grid, PathSpec(start=x0, theta=theta, length=length), nf, _config(eps1, 1e-13, nf.K, nf.N), workers=workers)
    io.write_catalog(cells, out)
    n_err = sum(c["status"] == "error" for c in cells)
    _kv("cells", len(cells))
    _kv("poles", sum(len(c.get("catalog", {}).get("poles", [])) for c in cells))
    _kv("errors", n_err)
    return EXIT_OK


@cli.command()
@click.option("--forcing", type=FORCING, default="x^2")
@click.option("--N", "N", type=click.IntRange(min=1), default=2)
@click.option("--J", "J", type=click.IntRange(min=6), default=8)
def obstruct(forcing, N, J):
    """Normal-form resonance test and classical Laurent test side by side."""
    rep = resonance_residual(forcing, N=N)
    cls = painleve_test(forcing, J)
    _kv("forcing", str(forcing))
    _kv("normal_form", rep.summary())
    _kv("laurent", cls.summary())
    _kv("agree", rep.passes == cls.passes)
    if rep.passes != cls.passes:
        return EXIT_INVARIANT
    return EXIT_OK if rep.passes else EXIT_OBSTRUCTION


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="p1nf", standalone_mode=False)
    except click.exceptions.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except click.exceptions.Exit as exc:
        return exc.exit_code
    if rv is None:
        return EXIT_OK
    return int(rv)


if __name__ == "__main__":
    sys.exit(main())
