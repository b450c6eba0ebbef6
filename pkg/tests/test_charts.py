import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from p1normal.charts import (
    ChartError,
    ChartPoint,
    EllipticPoint,
    InversionError,
    OutsideDomainWarning,
    P1Point,
    RegionParams,
    check_closure,
    eval_Gamma,
    from_chart,
    gamma_map,
    in_region,
    invert_Gamma,
    pushforward_residual,
    to_chart,
)

finite = st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False)


def test_to_chart_examples():
    assert to_chart(P1Point(0, 1, 2)) == ChartPoint(0, -2, 0.25)
    assert to_chart(P1Point(0, 1, -2)) == ChartPoint(0, 2, 0.25)
    z = 0.1 + 0.05j
    c = to_chart(P1Point(1 + z, z**-2, -2 * z**-3))
    assert abs(c.v - 2 * z) < 1e-15 and abs(c.w - 0.25) < 1e-15
    with pytest.raises(ChartError, match="chart singular"):
        to_chart(P1Point(0, 0, 1))
    with pytest.raises(ChartError, match="chart singular"):
        to_chart(EllipticPoint(0, 1, 0))


def test_from_chart_examples():
    assert from_chart(ChartPoint(0, -2, 0.25)) == P1Point(0, 1, 2)
    e = from_chart(ChartPoint(3, 0.2, 0.25), "elliptic")
    assert isinstance(e, EllipticPoint) and abs(e.u - 100) < 1e-12
    with pytest.raises(ChartError, match="point at infinity"):
        from_chart(ChartPoint(0, 0, 0.25))


@given(finite, finite)
def test_chart_roundtrip(y, yp):
    back = from_chart(to_chart(P1Point(0, y, yp)))
    assert cmath.isclose(back.y, y, rel_tol=1e-12) and cmath.isclose(back.yp, yp, rel_tol=1e-12)


def test_gamma_identity_on_axis(nf12):
    c = ChartPoint(0.3 + 0.1j, 0, 0.26)
    assert np.allclose(eval_Gamma(nf12, c).as_array(), c.as_array(), rtol=0, atol=1e-15)
    assert invert_Gamma(nf12, c) == c


def test_gamma_leading_term(nf12):
    x = eval_Gamma(nf12, ChartPoint(1, 0.1, 0.25)).base
    assert abs(x - (1 - 1.5625e-8)) < 1e-9
    # next correction is gamma_6 v^6 = -v^6/1920
    assert abs(x - (1 - 1.5625e-8 - 1e-6 / 1920)) < 1e-13


def test_gamma_scaling(nf12):
    d = [abs(eval_Gamma(nf12, ChartPoint(1, v, 0.25)).base - 1) for v in (0.02, 0.01)]
    assert d[0] / d[1] == pytest.approx(2**5, rel=1e-2)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_inversion_roundtrip(nf12, r0, r1, r2, a0, a1, a2):
    nf = nf12
    P = RegionParams()
    p = ChartPoint(r0 * P.xi * cmath.exp(1j * a0), 0.99 * r1 / P.S * cmath.exp(1j * a1), 0.25 + r2 * P.delta * cmath.exp(1j * a2))
    z = invert_Gamma(nf, p)
    assert np.abs(gamma_map(nf)(z.base, z.v, z.w) - p.as_array()).max() <= 1e-12


def test_inversion_fails_far_out(nf12):
    with pytest.raises(InversionError, match="outside invertibility region"):
        invert_Gamma(nf12, ChartPoint(0, 50, 40))


def test_in_region():
    P = RegionParams()
    v = in_region(ChartPoint(0, 0, 0.25), P)
    assert v.inside and v.margins == {"base": 1.0, "v": 1 / P.R, "w": P.eps}
    assert not in_region(ChartPoint(0, 1 / P.R, 0.25), P)
    assert in_region(ChartPoint(0.2, 0.1, 0.26), P, "delta1")
    assert not in_region(ChartPoint(0.2, 0.2, 0.26), P, "delta1")
    with pytest.raises(ValueError):
        in_region(ChartPoint(0, 0, 0.25), P, "nowhere")


def test_region_params_validated():
    with pytest.raises(ValueError):
        RegionParams(R=-1)


def test_handoff_entry_point_inside():
    # |y1| = 1/eps1 on the pure pole: v1 = 2 eps1^(1/2), w1 = 1/4
    eps1 = 1e-3
    z = eps1**0.5
    c = to_chart(P1Point(0.3 + z, z**-2, -2 * z**-3))
    assert in_region(c, RegionParams(), "delta1", center=0.3)


def test_closure(nf12):
    assert check_closure(nf12, samples=32)


def test_outside_warning(nf12):
    with pytest.warns(OutsideDomainWarning):
        eval_Gamma(nf12, ChartPoint(0, 0.3, 0.25), RegionParams())


def test_pushforward_scaling():
    from p1normal.normal_form import P1, solve_normal_form

    nf = solve_normal_form(P1, 8, 40)
    c = ChartPoint(0.2 + 0.1j, 0.06 * cmath.exp(0.7j), 0.25 + 0.01j)
    a = pushforward_residual(nf, c)
    b = pushforward_residual(nf, ChartPoint(c.base, c.v / 2, c.w))
    assert a / b / 2**9 == pytest.approx(1, abs=0.25)
    r1, r2 = pushforward_residual(nf, c, components=True)
    # the w1 equation carries 1/v1, so r2 = -(2 w1 / v1) r1
    assert abs(r2) > abs(r1)
