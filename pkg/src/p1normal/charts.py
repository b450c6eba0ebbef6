"""Phase-space charts and numeric evaluation of the normal-form map.

(y, y') <-> (v, w) = (-y'/y^2, y^3/y'^2), and Gamma(t, v, w) = (x, v1, w1)
evaluated from the exact series with complex binary64 Horner schemes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .normal_form import NormalFormSeries
from .series import VSeries, apply_L

__all__ = [
    "P1Point",
    "EllipticPoint",
    "ChartPoint",
    "RegionParams",
    "RegionVerdict",
    "ChartError",
    "InversionError",
    "to_chart",
    "from_chart",
    "SeriesEvaluator",
    "GammaMap",
    "gamma_map",
    "eval_Gamma",
    "invert_Gamma",
    "in_region",
    "check_closure",
    "pushforward_residual",
    "eval_series_mp",
]


class ChartError(ValueError):
    pass


class InversionError(ArithmeticError):
    pass


class OutsideDomainWarning(UserWarning):
    pass


@dataclass(frozen=True)
class P1Point:
    x: complex
    y: complex
    yp: complex


@dataclass(frozen=True)
class EllipticPoint:
    t: complex
    u: complex
    up: complex


@dataclass(frozen=True)
class ChartPoint:
    base: complex
    v: complex
    w: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.base, self.v, self.w], dtype=complex)


@dataclass(frozen=True)
class RegionParams:
    """Polydisk radii for Delta (R, eps) and the inner region Delta_1 (xi, S, delta)."""

    R: float = 4.0
    eps: float = 0.05
    xi: float = 0.5
    S: float = 8.0
    delta: float = 0.025

    def __post_init__(self):
        if self.R < 1:
            raise ValueError("R must be >= 1")
        if not 0 < self.eps < 0.25:
            raise ValueError("eps must lie in (0, 1/4)")
        if self.xi <= 0 or self.S <= 0 or self.delta <= 0:
            raise ValueError("Delta_1 radii must be positive")


@dataclass(frozen=True)
class RegionVerdict:
    inside: bool
    margins: dict = field(default_factory=dict)

    def __bool__(self):
        return self.inside


def to_chart(p) -> ChartPoint:
    """(v, w) = (-y'/y^2, y^3/y'^2) for a P1Point or EllipticPoint."""
    if isinstance(p, P1Point):
        base, y, yp = p.x, p.y, p.yp
    else:
        base, y, yp = p.t, p.u, p.up
    if y == 0 or yp == 0:
        raise ChartError("chart singular")
    y, yp = complex(y), complex(yp)
    return ChartPoint(complex(base), -yp / (y * y), y**3 / (yp * yp))


def from_chart(c: ChartPoint, kind: str = "p1"):
    """Inverse chart: y = 1/(v^2 w), y' = -1/(v^3 w^2)."""
    if c.v == 0:
        raise ChartError("point at infinity (pole locus)")
    if c.w == 0:
        raise ChartError("chart singular")
    v, w = complex(c.v), complex(c.w)
    y = 1 / (v * v * w)
    yp = -1 / (v**3 * w * w)
    if kind == "p1":
        return P1Point(c.base, y, yp)
    return EllipticPoint(c.base, y, yp)


def _cube(series: VSeries, K: int | None = None) -> np.ndarray:
    K = series.K if K is None else K
    N = series.N
    D = max((x.t_degree for x in series.coeffs.values()), default=0)
    C = np.zeros((K + 1, N + 1, max(D, 0) + 1))
    for k, ws in series.coeffs.items():
        if k > K:
            continue
        for n, p in enumerate(ws.coeffs):
            for d, c in enumerate(p.coeffs):
                C[k, n, d] = float(c)
    return C


def _deriv_axis(C: np.ndarray, axis: int) -> np.ndarray:
    m = C.shape[axis]
    if m == 1:
        return np.zeros_like(C)
    idx = np.arange(1, m, dtype=float)
    shape = [1, 1, 1]
    shape[axis] = m - 1
    D = np.take(C, np.arange(1, m), axis=axis) * idx.reshape(shape)
    pad = [(0, 0)] * 3
    pad[axis] = (0, 1)
    return np.pad(D, pad)


def _horner3(C: np.ndarray, v, s, tau):
    """Nested Horner: tau innermost, then s, then v (v outermost, the small variable)."""
    B = C[..., -1].astype(complex)
    for d in range(C.shape[-1] - 2, -1, -1):
        B = B * tau + C[..., d]
    A = B[..., -1]
    for n in range(C.shape[-2] - 2, -1, -1):
        A = A * s + B[..., n]
    val = A[..., -1]
    for k in range(C.shape[-3] - 2, -1, -1):
        val = val * v + A[..., k]
    return val


class SeriesEvaluator:
    """Complex binary64 evaluation of a VSeries and its first partials."""

    def __init__(self, series: VSeries, x0=0):
        self.x0 = complex(x0)
        C = _cube(series)
        self.K, self.N = series.K, series.N
        self.stack = np.stack([C, _deriv_axis(C, 2), _deriv_axis(C, 0), _deriv_axis(C, 1)])

    def __call__(self, t, v, w) -> complex:
        return complex(_horner3(self.stack[0], v, w - 0.25, t - self.x0))

    def with_partials(self, t, v, w) -> np.ndarray:
        """[value, d/dt, d/dv, d/dw]."""
        return _horner3(self.stack, v, w - 0.25, t - self.x0)


def _mp(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpc(x)


def eval_series_mp(series: VSeries, t, v, w, x0=0, dps: int = 50):
    """High-precision evaluation straight from the exact coefficients."""
    with mpmath.workdps(dps):
        tau = mpmath.mpc(t) - _mp(x0)
        s = mpmath.mpc(w) - mpmath.mpf(1) / 4
        vv = mpmath.mpc(v)
        acc = mpmath.mpc(0)
        for k in range(series.K, -1, -1):
            ws = series.coeffs.get(k)
            ck = mpmath.mpc(0)
            if ws is not None:
                for p in reversed(ws.coeffs):
                    pv = mpmath.mpc(0)
                    for c in reversed(p.coeffs):
                        pv = pv * tau + _mp(c)
                    ck = ck * s + pv
            acc = acc * vv + ck
        return acc


class GammaMap:
    """Numeric Gamma built from a solved NormalFormSeries.

    eta is evaluated as v * q with q = 1/(L gamma), and w1 = w / q^2, which is
    the same as v^2 w eta^-2 but stays regular on the axis v = 0.
    """

    def __init__(self, nf: NormalFormSeries):
        self.nf = nf
        self.x0 = complex(nf.x0)
        self.gamma = SeriesEvaluator(nf.gamma, nf.x0)
        self.q = SeriesEvaluator(nf.Lgamma.inverse(), nf.x0)
        self.Lgamma = SeriesEvaluator(nf.Lgamma, nf.x0)
        self.theta = SeriesEvaluator(nf.theta, nf.x0)

    def __call__(self, t, v, w) -> np.ndarray:
        x = self.gamma(t, v, w)
        q = self.q(t, v, w)
        return np.array([x, v * q, w / (q * q)])

    def jacobian(self, t, v, w) -> tuple[np.ndarray, np.ndarray]:
        g = self.gamma.with_partials(t, v, w)
        q = self.q.with_partials(t, v, w)
        val = np.array([g[0], v * q[0], w / (q[0] * q[0])])
        J = np.empty((3, 3), dtype=complex)
        J[0] = g[1:]
        J[1] = v * q[1:]
        J[1, 1] += q[0]
        J[2] = -2 * w * q[1:] / q[0] ** 3
        J[2, 2] += 1 / (q[0] * q[0])
        return val, J

    def eta(self, t, v, w) -> complex:
        return v * self.q(t, v, w)

    def invert(self, target: ChartPoint, tol: float = 1e-13, maxiter: int = 25) -> ChartPoint:
        tgt = target.as_array()
        if target.v == 0:
            return target
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return self._newton(tgt, tol, maxiter)

    def _newton(self, tgt, tol, maxiter):
        z = tgt.copy()
        scale = max(1.0, float(np.abs(tgt).max()))
        for _ in range(maxiter):
            val, J = self.jacobian(*z)
            F = val - tgt
            if np.abs(F).max() <= tol * scale:
                return ChartPoint(complex(z[0]), complex(z[1]), complex(z[2]))
            try:
                z = z - np.linalg.solve(J, F)
            except np.linalg.LinAlgError as exc:
                raise InversionError("outside invertibility region") from exc
            if not np.all(np.isfinite(z)):
                break
        val, _ = self.jacobian(*z)
        if np.all(np.isfinite(val)) and np.abs(val - tgt).max() <= tol * scale:
            return ChartPoint(complex(z[0]), complex(z[1]), complex(z[2]))
        raise InversionError("outside invertibility region")


def gamma_map(nf: NormalFormSeries) -> GammaMap:
    gm = nf.__dict__.get("_gamma_map")
    if gm is None:
        gm = GammaMap(nf)
        nf.__dict__["_gamma_map"] = gm
    return gm


def in_region(c: ChartPoint, params: RegionParams = RegionParams(), which: str = "delta", center=None) -> RegionVerdict:
    """Strict membership in Delta(x0) or Delta_1(x0) with distances to each face."""
    x0 = c.base if center is None else center
    if which == "delta":
        radii = (1.0, 1 / params.R, params.eps)
    elif which == "delta1":
        radii = (params.xi, 1 / params.S, params.delta)
    else:
        raise ValueError(f"unknown region {which!r}")
    d = (abs(c.base - x0), abs(c.v), abs(c.w - 0.25))
    margins = {name: r - x for name, r, x in zip(("base", "v", "w"), radii, d)}
    return RegionVerdict(all(m > 0 for m in margins.values()), margins)


def eval_Gamma(nf: NormalFormSeries, c: ChartPoint, params: RegionParams | None = None) -> ChartPoint:
    if params is not None and not in_region(c, params, "delta", center=complex(nf.x0)):
        warnings.warn("evaluating Gamma outside Delta; truncation error is unbounded", OutsideDomainWarning, stacklevel=2)
    x, v1, w1 = gamma_map(nf)(c.base, c.v, c.w)
    return ChartPoint(complex(x), complex(v1), complex(w1))


def invert_Gamma(nf: NormalFormSeries, target: ChartPoint) -> ChartPoint:
    return gamma_map(nf).invert(target)


def check_closure(nf: NormalFormSeries, params: RegionParams = RegionParams(), center=0j, samples: int = 64, seed: int = 0) -> RegionVerdict:
    """Sample the boundary of closure(Delta_1) and confirm Gamma^-1 lands in Delta."""
    rng = np.random.default_rng(seed)
    worst = {"base": math.inf, "v": math.inf, "w": math.inf}
    gm = gamma_map(nf)
    for _ in range(samples):
        ph = np.exp(2j * np.pi * rng.random(3))
        p = ChartPoint(center + params.xi * ph[0], ph[1] / params.S, 0.25 + params.delta * ph[2])
        try:
            z = gm.invert(p)
        except InversionError:
            return RegionVerdict(False, {"inversion": -1.0})
        verdict = in_region(z, params, "delta", center=center)
        for key, m in verdict.margins.items():
            worst[key] = min(worst[key], m)
    return RegionVerdict(all(m > 0 for m in worst.values()), worst)


def pushforward_residual(nf: NormalFormSeries, c: ChartPoint, dps: int = 50, components: bool = False):
    """Defect of the target system along the elliptic flow through ``c``.

    Along solutions of dv/dt = 2/w - 6, dw/dt = 12 (w - 1/4)/v the time
    derivative is the operator L, so with x = gamma, v1 = eta, w1 = v^2 w / eta^2
    the defects are

        r1 = L eta - L gamma (2/w1 - 6 - f(x) w1^2 v1^4)
        r2 = L w1  - L gamma (12 (w1 - 1/4)/v1 + 2 f(x) w1^3 v1^3).

    The second equation carries the 1/v1 pole of the vector field, so it is
    measured in its cleared form v1 * r2.  Evaluated with ``dps`` digits;
    returns max(|r1|, |v1 r2|), or (r1, r2) as complex numbers if
    ``components``.
    """
    cache = nf.__dict__.setdefault("_pushforward_series", {})
    if not cache:
        cache["Leta"] = apply_L(nf.eta)
    Leta = cache["Leta"]
    t, v, w = c.base, c.v, c.w
    with mpmath.workdps(dps):
        x = eval_series_mp(nf.gamma, t, v, w, nf.x0, dps)
        eta = eval_series_mp(nf.eta, t, v, w, nf.x0, dps)
        Lg = eval_series_mp(nf.Lgamma, t, v, w, nf.x0, dps)
        Le = eval_series_mp(Leta, t, v, w, nf.x0, dps)
        vv, ww = mpmath.mpc(v), mpmath.mpc(w)
        quarter = mpmath.mpf(1) / 4
        A = 2 / ww - 6
        Lw = 12 * (ww - quarter) / vv
        w1 = vv**2 * ww / eta**2
        Lw1 = w1 * (2 * A / vv + Lw / ww - 2 * Le / eta)
        fx = mpmath.mpc(0)
        for coef in reversed(nf.forcing.coeffs):
            fx = fx * x + _mp(coef)
        r1 = Le - Lg * (2 / w1 - 6 - fx * w1**2 * eta**4)
        r2 = Lw1 - Lg * (12 * (w1 - quarter) / eta + 2 * fx * w1**3 * eta**3)
        if components:
            return complex(r1), complex(r2)
        return float(max(abs(r1), abs(eta * r2)))
