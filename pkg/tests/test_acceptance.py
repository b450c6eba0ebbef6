"""One test per acceptance criterion; each records a PASS/FAIL line."""

import cmath
import math
import time
from fractions import Fraction as F

import numpy as np
import pytest

from conftest import laurent_coeffs, laurent_eval
from p1normal.charts import ChartPoint, P1Point, RegionParams, gamma_map, pushforward_residual
from p1normal.integrator import IntegratorConfig, PathSpec, default_series, direct_pole, loop_around, run_path
from p1normal.normal_form import (
    P1,
    Forcing,
    norm_and_growth,
    painleve_test,
    residual_pde,
    resonance_residual,
    solve_normal_form,
)
from p1normal.series import TPoly


def random_case(rng, dist=0.3, length=0.6):
    """Random pole p, free coefficient a6 and a start point aimed at p."""
    p = complex(*rng.uniform(-1, 1, 2))
    a6 = complex(*rng.uniform(-1, 1, 2))
    a = laurent_coeffs(p, a6)
    z = dist * cmath.exp(1j * rng.uniform(0, 2 * math.pi))
    y, yp = laurent_eval(a, z)
    theta = cmath.phase(-z) + rng.uniform(-0.02, 0.02)
    return p, a, P1Point(p + z, y, yp), PathSpec(start=p + z, theta=theta, length=length)


@pytest.fixture(scope="module")
def nf_default():
    return default_series()


def test_c01_published_coefficients(record_acceptance):
    t0 = time.perf_counter()
    nf = solve_normal_form(P1, 8, 4)
    dt = time.perf_counter() - t0
    g5, g6 = nf.gamma[5], nf.gamma[6]
    ok = g5[0] == TPoly([0, F(-1, 640)]) and g5[1] == TPoly([0, F(-7, 352)]) and g6[0] == TPoly([F(-1, 1920)]) and dt < 10
    record_acceptance(1, ok, f"gamma5 t-coefficients (s^0, s^1) = {g5[0][1]}, {g5[1][1]}; gamma6_0 = {g6[0][0]}; solve {dt:.2f}s")
    assert ok


def test_c02_resonance_dichotomy(record_acceptance):
    t0 = time.perf_counter()
    rows = []
    ok = True
    for text, expect in (("x", True), ("x^2", False), ("1", True)):
        f = Forcing.parse(text)
        nfr = resonance_residual(f)
        cls = painleve_test(f)
        half_f2 = f.poly().deriv().deriv() / 2
        ok &= nfr.passes is expect and cls.passes is expect and cls.resonance_residual == half_f2
        rows.append(f"f={text}: normal form {'ok' if nfr.passes else 'obstructed'}, Laurent residual {', '.join(map(str, cls.resonance_residual.coeffs)) or 0}")
    dt = time.perf_counter() - t0
    ok &= dt < 30
    record_acceptance(2, ok, "; ".join(rows) + f"; {dt:.2f}s")
    assert ok


def test_c03_zero_pde_residual(record_acceptance):
    t0 = time.perf_counter()
    nf = solve_normal_form(P1, 16, 12)
    r = residual_pde(nf)
    dt = time.perf_counter() - t0
    nonzero = [k for k in range(nf.K + 1) if r[k]]
    ok = not nonzero and dt < 300
    record_acceptance(3, ok, f"(K,N)=(16,12) residual zero through v^16: {not nonzero}; {dt:.2f}s")
    assert ok


def test_c04_degree_bound(record_acceptance):
    nf = solve_normal_form(P1, 16, 4)
    degs = {k: nf.gamma[k].t_degree for k in range(5, 17)}
    ok = all(d <= (k - 1) // 4 for k, d in degs.items())
    record_acceptance(4, ok, f"deg_t gamma_k for k=5..16 (-1 = zero): {list(degs.values())}")
    assert ok


def test_c05_conjugacy_order_scaling(record_acceptance):
    K = 12
    nf = solve_normal_form(P1, K, 60)
    P = RegionParams(R=4, eps=0.05)
    rng = np.random.default_rng(0)
    lo, hi = 1 / (8 * P.R), 1 / (2 * P.R)
    ratios = []
    for _ in range(20):
        t = complex(*rng.uniform(-0.7, 0.7, 2))
        v = math.sqrt(rng.uniform(lo**2, hi**2)) * cmath.exp(2j * math.pi * rng.random())
        s = P.eps * math.sqrt(rng.random()) * cmath.exp(2j * math.pi * rng.random())
        a = pushforward_residual(nf, ChartPoint(t, v, 0.25 + s))
        b = pushforward_residual(nf, ChartPoint(t, v / 2, 0.25 + s))
        ratios.append(a / b / 2 ** (K + 1))
    ok = all(0.75 <= r <= 1.25 for r in ratios)
    record_acceptance(5, ok, f"ratio / 2^13 over 20 points in [{min(ratios):.3f}, {max(ratios):.3f}]")
    assert ok


def test_c06_inversion(record_acceptance):
    nf = solve_normal_form(P1, 12, 8)
    gm = gamma_map(nf)
    P = RegionParams()
    rng = np.random.default_rng(1)
    errs = []
    for _ in range(100):
        ph = np.exp(2j * np.pi * rng.random(3))
        r = np.sqrt(rng.random(3))
        p = ChartPoint(complex(r[0] * P.xi * ph[0]), complex(r[1] / P.S * ph[1]), complex(0.25 + r[2] * P.delta * ph[2]))
        z = gm.invert(p)
        errs.append(float(np.abs(gm(z.base, z.v, z.w) - p.as_array()).max()))
    ratios = []
    for _ in range(20):
        ph = np.exp(2j * np.pi * rng.random(3))
        x, w1, v1 = 0.3 * ph[0], 0.25 + 0.01 * ph[2], 0.04 * ph[1]
        d = [np.abs(gm.invert(ChartPoint(x, v, w1)).as_array() - ChartPoint(x, v, w1).as_array()).max() for v in (v1, v1 / 2)]
        ratios.append(d[0] / d[1])
    ok = max(errs) <= 1e-12 and all(12 <= q <= 20 for q in ratios)
    record_acceptance(6, ok, f"max roundtrip {max(errs):.2e}; (Gamma^-1 - Id) halving ratio in [{min(ratios):.2f}, {max(ratios):.2f}] (expect 16)")
    assert ok


def test_c07_pole_agreement(record_acceptance, nf_default):
    rng = np.random.default_rng(7)
    cfg = IntegratorConfig()
    diffs, times = [], []
    for _ in range(10):
        _, _, ic, path = random_case(rng)
        t0 = time.perf_counter()
        tr = run_path(ic, path, nf_default, cfg)
        p_direct, _ = direct_pole(ic, path, IntegratorConfig(rtol=1e-13, atol=1e-15), y_stop=1e12)
        times.append(time.perf_counter() - t0)
        diffs.append(min((abs(r.p - p_direct) for r in tr.poles), default=math.inf))
    ok = max(diffs) <= 1e-8 and max(times) < 30
    record_acceptance(7, ok, f"max |p_handoff - p_direct| = {max(diffs):.2e} over 10 runs; slowest {max(times):.2f}s")
    assert ok


def test_c08_laurent_structure(record_acceptance, nf_default):
    rng = np.random.default_rng(8)
    cfg = IntegratorConfig(eps1=1e-2, region=RegionParams(S=4))
    worst_probe, worst_tail, monotone, n = 0.0, 0.0, True, 0
    used = []
    for _ in range(5):
        _, _, ic, path = random_case(rng)
        tr = run_path(ic, path, nf_default, cfg)
        for rec, sol in zip(tr.poles, tr.solutions):
            n += 1
            used.append(rec.chart_data["eps1"])
            p = rec.p
            d = (rec.chart_data["x1"] - p) / abs(rec.chart_data["x1"] - p)
            res = []
            for r in (0.04, 0.02, 0.01):
                y, _ = sol(p + r * d)
                res.append(abs(y * (r * d) ** 2 - 1))
            worst_probe = max(worst_probe, res[0])
            monotone &= res[0] > res[1] > res[2]
            z = 1e-2 * d
            y, _ = sol(p + z)
            tail = z**-2 - p / 10 * z**2 - z**3 / 6
            worst_tail = max(worst_tail, abs(y - tail))
    ok = n > 0 and worst_probe <= 1e-4 and monotone and worst_tail <= 1e-6
    record_acceptance(8, ok, f"{n} poles: max |y z^2 - 1| at 0.04 = {worst_probe:.2e}, shrinking: {monotone}; max tail error at |z|=1e-2 = {worst_tail:.2e}; handoff eps1 used {sorted(set(used))}")
    assert ok


def test_c09_single_valuedness(record_acceptance, nf_default):
    rng = np.random.default_rng(9)
    cfg = IntegratorConfig()
    worst = 0.0
    for _ in range(3):
        _, _, ic, path = random_case(rng)
        tr = run_path(ic, path, nf_default, cfg)
        rec, sol = tr.poles[0], tr.solutions[0]
        rho = 4 * math.sqrt(rec.chart_data["eps1"])
        d = (rec.chart_data["x2"] - rec.p) / abs(rec.chart_data["x2"] - rec.p)
        x = rec.p + rho * d
        st = P1Point(x, *sol(x))
        y, yp = loop_around(st, rec.p, cfg)
        worst = max(worst, abs(y - st.y) / abs(st.y), abs(yp - st.yp) / abs(st.yp))
    ok = worst <= 1e-9
    record_acceptance(9, ok, f"max relative loop mismatch on |x-p| = 4 eps1^(1/2): {worst:.2e}")
    assert ok


@pytest.mark.xfail(strict=True, reason="gamma_8 and gamma_12 vanish identically, so the literal ratio is infinite at k=8 and k=12")
def test_c10_growth_literal(record_acceptance):
    nf = solve_normal_form(P1, 16, 8)
    g = norm_and_growth(nf, eps=0.05)
    window = {k: g.ratios[k] for k in range(8, 16)}
    bridged = {k: r for k, r in g.bridged_ratios.items() if 8 <= k <= 15}
    ok = all(math.isfinite(r) for r in window.values())
    record_acceptance(
        10,
        ok,
        f"literal ratios k=8..15: {', '.join(f'{r:.3g}' for r in window.values())}; "
        f"gap-bridged max {max(bridged.values()):.3g}; fit C={g.C:.3g} R={g.R:.3g}",
    )
    assert ok


def test_c10_growth_bridged_diagnostic():
    nf = solve_normal_form(P1, 16, 8)
    g = norm_and_growth(nf, eps=0.05)
    bridged = [r for k, r in g.bridged_ratios.items() if 8 <= k <= 15]
    assert bridged and all(math.isfinite(r) and r > 0 for r in bridged)
