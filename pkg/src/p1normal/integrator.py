"""Complex-plane integration of y'' = 6 y^2 + x with continuation through poles.

Regular stretches use scipy's DOP853 in a real path parameter with the step
capped by a fraction of the local analyticity radius.  When |y| reaches
1/eps1 the state is mapped into the elliptic normal form, the pole is located
as a zero of Q = u^(-1/2), and integration resumes from an exit point whose
value is read off the elliptic solution through the normal-form map.

The running integral I = int y dx is carried along so that the first integral
C = y'^2 - 4 y^3 - 2 x y + 2 I can be monitored.
"""

from __future__ import annotations

import bisect
import concurrent.futures as cf
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import DOP853, solve_ivp
from scipy.optimize import brentq

from .charts import ChartPoint, P1Point, RegionParams, from_chart, gamma_map, in_region, to_chart
from .elliptic import ContractionError, EllipticLocal, NoPoleError, PoleRecord, iterate_J, locate_pole
from .normal_form import NormalFormSeries, P1, solve_normal_form

__all__ = [
    "IntegrationError",
    "HandoffError",
    "PathSpec",
    "IntegratorConfig",
    "SolutionTrace",
    "PoleCatalog",
    "HandoffDecision",
    "EquivalenceSolution",
    "taylor_radius",
    "taylor_coefficients",
    "taylor_eval",
    "integrate_path",
    "handoff_detect",
    "continue_through_pole",
    "run_path",
    "loop_around",
    "direct_pole",
    "pole_map",
    "default_series",
]


class IntegrationError(RuntimeError):
    pass


class HandoffError(RuntimeError):
    def __init__(self, msg, margins=None):
        super().__init__(msg)
        self.margins = margins or {}


def taylor_radius(x: complex, y: complex, yprime: complex) -> float:
    """Lower bound min(|y|^-1/2, |y'/2|^-1/3, |y^2 + x/6|^-1/4); zero arguments impose nothing."""

    def term(a, p):
        a = abs(a)
        return math.inf if a == 0 else a ** (-p)

    return min(term(y, 1 / 2), term(yprime / 2, 1 / 3), term(y * y + x / 6, 1 / 4))


def taylor_coefficients(x0: complex, y0: complex, yp0: complex, n: int = 30) -> np.ndarray:
    """Local Taylor coefficients c_0..c_{n-1} of the P1 solution about x0."""
    c = np.zeros(n, dtype=complex)
    c[0], c[1] = y0, yp0
    for m in range(n - 2):
        conv = np.dot(c[: m + 1], c[m::-1])
        forcing = x0 if m == 0 else (1 if m == 1 else 0)
        c[m + 2] = (6 * conv + forcing) / ((m + 1) * (m + 2))
    return c


def taylor_eval(c: np.ndarray, h: complex) -> tuple[complex, complex]:
    y = np.polynomial.polynomial.polyval(h, c)
    yp = np.polynomial.polynomial.polyval(h, c[1:] * np.arange(1, len(c)))
    return complex(y), complex(yp)


@dataclass(frozen=True)
class PathSpec:
    """Polyline from ``start``; a ray (theta, length) unless ``vertices`` is given.

    ``detour`` selects how pole disks are crossed: "elliptic" (through the
    normal form), or "upper"/"lower" (direct integration on a semicircle).
    """

    start: complex = 0j
    theta: float = 0.0
    length: float = 1.0
    vertices: tuple = ()
    detour: str = "elliptic"

    def __post_init__(self):
        if self.detour not in ("elliptic", "upper", "lower"):
            raise ValueError(f"unknown detour policy {self.detour!r}")
        if not self.vertices and not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError("path length must be positive and finite")

    @property
    def points(self) -> list[complex]:
        if self.vertices:
            return [complex(self.start)] + [complex(v) for v in self.vertices]
        return [complex(self.start), complex(self.start) + self.length * complex(math.cos(self.theta), math.sin(self.theta))]

    @property
    def total_length(self) -> float:
        pts = self.points
        return float(sum(abs(b - a) for a, b in zip(pts, pts[1:])))

    def locate(self, s: float) -> tuple[complex, complex, int]:
        """(x, unit direction, segment index) at arc length s."""
        pts = self.points
        acc = 0.0
        for i, (a, b) in enumerate(zip(pts, pts[1:])):
            L = abs(b - a)
            if s <= acc + L or i == len(pts) - 2:
                d = (b - a) / L
                return a + (s - acc) * d, d, i
            acc += L
        raise AssertionError("unreachable")

    def segment(self, s: float) -> int:
        """Index of the segment containing arc length s (segments are half-open)."""
        bps = self.breakpoints()
        return min(max(bisect.bisect_right(bps, s) - 1, 0), len(bps) - 2)

    def breakpoints(self) -> list[float]:
        pts = self.points
        return list(np.cumsum([0.0] + [abs(b - a) for a, b in zip(pts, pts[1:])]))


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-13
    atol: float = 1e-14
    eps1: float = 1e-3
    step_fraction: float = 0.25
    region: RegionParams = RegionParams()
    max_steps: int = 200_000
    drift_tol: float = 1e-9
    probe_fraction: float = 0.1
    eps1_refinements: int = 3
    ball_policy: str = "contraction"
    max_contraction: float = 0.5
    K: int = 12
    N: int = 6

    def __post_init__(self):
        if self.ball_policy not in ("contraction", "strict"):
            raise ValueError("ball_policy must be 'contraction' or 'strict'")
        if not 0 < self.step_fraction < 1:
            raise ValueError("step_fraction must lie in (0, 1)")
        if not 0 < self.eps1 < 1:
            raise ValueError("eps1 must lie in (0, 1)")


def default_series(cfg: IntegratorConfig = IntegratorConfig()) -> NormalFormSeries:
    return solve_normal_form(P1, cfg.K, cfg.N)


def first_integral_value(x, y, yp, I) -> complex:
    return yp * yp - 4 * y**3 - 2 * x * y + 2 * I


def _scale(x, y, yp, I) -> float:
    return max(1.0, abs(yp) ** 2, 4 * abs(y) ** 3, 2 * abs(x * y), 2 * abs(I))


@dataclass
class PoleCatalog:
    poles: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"poles": [p.to_dict() for p in self.poles], "events": list(self.events)}


@dataclass
class SolutionTrace:
    """Samples (s, x, y, y', I) along a path plus pole bookkeeping.

    ``runs`` holds the sample index at which each pole-free stretch starts;
    the first integral is compared only within a run.
    """

    s: list = field(default_factory=list)
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    yp: list = field(default_factory=list)
    I: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    runs: list = field(default_factory=lambda: [0])
    catalog: PoleCatalog = field(default_factory=PoleCatalog)
    status: str = "running"
    solutions: list = field(default_factory=list, repr=False)

    def append(self, s, x, z):
        self.s.append(float(s))
        self.x.append(complex(x))
        self.y.append(complex(z[0]))
        self.yp.append(complex(z[1]))
        self.I.append(complex(z[2]))

    def new_run(self):
        self.runs.append(len(self.s))

    @property
    def last(self) -> P1Point:
        return P1Point(self.x[-1], self.y[-1], self.yp[-1])

    @property
    def poles(self) -> list:
        return self.catalog.poles

    def drift(self) -> float:
        """Largest change of the first integral within a pole-free run.

        Measured relative to the largest term of the identity met so far in
        the run, which is the size roundoff is committed at.
        """
        worst = 0.0
        bounds = self.runs + [len(self.s)]
        for a, b in zip(bounds, bounds[1:]):
            if b - a < 2:
                continue
            C0 = first_integral_value(self.x[a], self.y[a], self.yp[a], self.I[a])
            scale = 0.0
            for i in range(a, b):
                C = first_integral_value(self.x[i], self.y[i], self.yp[i], self.I[i])
                scale = max(scale, _scale(self.x[i], self.y[i], self.yp[i], self.I[i]))
                worst = max(worst, abs(C - C0) / scale)
        return worst


def _rhs(curve, dcurve):
    def f(s, z):
        x = curve(s)
        dx = dcurve(s)
        return np.array([dx * z[1], dx * (6 * z[0] * z[0] + x), dx * z[0]])

    return f


def _integrate_curve(trace, z0, curve, dcurve, s0, s1, cfg, threshold=None):
    """Step from s0 to s1 along x = curve(s); stop early when |y| >= threshold.

    Returns (s, z, hit) with ``hit`` true when the threshold was crossed; the
    returned state then sits on |y| = threshold.
    """
    f = _rhs(curve, dcurve)
    z = np.asarray(z0, dtype=complex)
    if s1 <= s0:
        return s0, z, False

    def cap(s, z):
        return cfg.step_fraction * taylor_radius(curve(s), z[0], z[1]) / abs(dcurve(s))

    solver = DOP853(f, s0, z, s1, rtol=cfg.rtol, atol=cfg.atol, max_step=cap(s0, z))
    for _ in range(cfg.max_steps):
        s_old, z_old = solver.t, solver.y.copy()
        limit = cap(s_old, z_old)
        solver.max_step = limit
        solver.step()
        if solver.status == "failed":
            raise IntegrationError("singular approach outside equivalence region (step failed)")
        h = solver.t - s_old
        trace.steps.append((h * abs(dcurve(s_old)), limit * abs(dcurve(s_old))))
        if threshold is not None and abs(solver.y[0]) >= threshold and abs(z_old[0]) < threshold:
            dense = solver.dense_output()
            s_star = brentq(lambda s: abs(dense(s)[0]) - threshold, s_old, solver.t, xtol=1e-15)
            sol = solve_ivp(f, (s_old, s_star), z_old, method="DOP853", rtol=cfg.rtol, atol=cfg.atol, max_step=limit)
            z_star = sol.y[:, -1]
            trace.append(s_star, curve(s_star), z_star)
            return s_star, z_star, True
        trace.append(solver.t, curve(solver.t), solver.y)
        if threshold is not None and abs(solver.y[0]) >= threshold:
            return solver.t, solver.y.copy(), True
        if solver.status == "finished":
            return solver.t, solver.y.copy(), False
    raise IntegrationError("step budget exhausted")


@dataclass
class HandoffDecision:
    decision: str
    chart: ChartPoint | None
    margins: dict


def handoff_detect(state: P1Point, cfg: IntegratorConfig = IntegratorConfig(), eps1: float | None = None) -> HandoffDecision:
    """Decide whether a large-|y| state may be handed to the normal form.

    The chart point must lie in Delta_1 around its own base point, and the
    first-integral ratio y'^2/(4 y^3) must be close to 1.
    """
    eps1 = cfg.eps1 if eps1 is None else eps1
    if abs(state.y) < 1 / eps1 * (1 - 1e-12):
        return HandoffDecision("none", None, {})
    c = to_chart(state)
    verdict = in_region(c, cfg.region, "delta1", center=c.base)
    margins = dict(verdict.margins)
    margins["energy"] = abs(state.yp**2 / (4 * state.y**3) - 1)
    return HandoffDecision("handoff" if verdict.inside else "defer", c, margins)


class EquivalenceSolution:
    """y(x) near a pole, read off the elliptic solution through Gamma.

    x = gamma(t, v(t), w(t)) is solved for t by Newton (dx/dt = L gamma), then
    y = u(t) and y' = -y^2 eta.
    """

    def __init__(self, nf: NormalFormSeries, local: EllipticLocal, x1: complex):
        self.nf = nf
        self.gm = gamma_map(nf)
        self.local = local
        self.offset = local.t1 - x1

    def t_of_x(self, x: complex, tol: float = 1e-15, maxiter: int = 40) -> complex:
        t = x + self.offset
        for _ in range(maxiter):
            _, _, v, w = self.local.chart(t)
            F = self.gm.gamma(t, v, w) - x
            t = t - F / self.gm.Lgamma(t, v, w)
            if abs(F) <= tol * max(1.0, abs(x)):
                return t
        raise HandoffError("no convergence solving x = gamma(t) in the handoff disk")

    def __call__(self, x: complex) -> tuple[complex, complex]:
        t = self.t_of_x(x)
        Q, _, v, w = self.local.chart(t)
        y = 1 / (Q * Q)
        return y, -y * y * self.gm.eta(t, v, w)


def continue_through_pole(trace: SolutionTrace, nf: NormalFormSeries, cfg: IntegratorConfig, eps1: float):
    """Hand the last state of ``trace`` to the elliptic normal form.

    Returns (record, solution, local); raises ContractionError or NoPoleError
    for the caller's policy to handle.
    """
    state = trace.last
    c1 = to_chart(state)
    ct = gamma_map(nf).invert(c1)
    e = from_chart(ct, "elliptic")
    local = EllipticLocal.from_point(ct.base, e.u, e.up, eps1=eps1)
    ball_note = None
    try:
        iterate_J(local)
    except ContractionError as exc:
        if cfg.ball_policy == "strict":
            raise
        iterate_J(local, check_ball=False)
        if local.contraction > cfg.max_contraction:
            raise ContractionError(f"outside contraction regime: observed factor {local.contraction:.3g}") from exc
        ball_note = str(exc)
    rec_t = locate_pole(local)
    sol = EquivalenceSolution(nf, local, state.x)
    p = rec_t.p
    # gamma(p, 0, 1/4) = p: the t- and x-plane poles coincide
    rho = 4 * math.sqrt(eps1)
    probe = cfg.probe_fraction * rho
    d = (state.x - p) / abs(state.x - p)
    xp = p + probe * d
    y_probe, _ = sol(xp)
    rec = PoleRecord(
        p=complex(p),
        K1=local.K1,
        source="elliptic",
        residual_check=float(abs(y_probe * (xp - p) ** 2 - 1)),
        probe_radius=probe,
        error_estimate=rec_t.error_estimate,
        chart_data={"x1": complex(state.x), "v1": c1.v, "w1": c1.w, "t1": ct.base, "v": ct.v, "w": ct.w, "eps1": eps1},
        margins={"contraction": local.contraction, "U_sup": float(np.abs(local.U).max()), "ball": local.ball},
    )
    if ball_note:
        rec.chart_data["ball"] = ball_note
    return rec, sol, local


def _detour(trace, z, s1, s2, x1, x2, side, cfg):
    """Direct integration on the semicircle with diameter [x1, x2]; "upper" keeps the disk on the right."""
    c = (x1 + x2) / 2
    r = abs(x2 - x1) / 2
    a0 = np.angle(x1 - c)
    sgn = -1.0 if side == "upper" else 1.0
    curve = lambda phi: c + r * np.exp(1j * (a0 + sgn * phi))  # noqa: E731
    dcurve = lambda phi: 1j * sgn * r * np.exp(1j * (a0 + sgn * phi))  # noqa: E731
    n0 = len(trace.s)
    _, z_end, _ = _integrate_curve(trace, z, curve, dcurve, 0.0, math.pi, cfg)
    for i in range(n0, len(trace.s)):
        trace.s[i] = s1 + (s2 - s1) * trace.s[i] / math.pi
    return z_end


def integrate_path(ic: P1Point, path: PathSpec, cfg: IntegratorConfig = IntegratorConfig(), s0: float = 0.0, trace: SolutionTrace | None = None, threshold: float | None = None, I0: complex = 0j):
    """Integrate from ``ic`` (at arc length ``s0``) along ``path``.

    Stops at the path end (status "end") or when |y| first reaches
    ``threshold`` (default 1/eps1; status "handoff").  No pole crossing here.
    """
    trace = SolutionTrace() if trace is None else trace
    threshold = 1 / cfg.eps1 if threshold is None else threshold
    z = np.array([ic.y, ic.yp, I0], dtype=complex)
    if not trace.s:
        trace.append(s0, ic.x, z)
    bps = path.breakpoints()
    s = s0
    while s < bps[-1]:
        seg = path.segment(s)
        seg_end = bps[seg + 1]
        a, b = path.points[seg], path.points[seg + 1]
        d = (b - a) / abs(b - a)
        curve = lambda q, a=a, d=d, base=bps[seg]: a + (q - base) * d  # noqa: E731
        dcurve = lambda q, d=d: d  # noqa: E731
        s, z, hit = _integrate_curve(trace, z, curve, dcurve, s, seg_end, cfg, threshold)
        if hit:
            trace.status = "handoff"
            return trace, s, z
        s = max(s, seg_end)
    trace.status = "end"
    return trace, s, z


def run_path(ic: P1Point, path: PathSpec, nf: NormalFormSeries | None = None, cfg: IntegratorConfig = IntegratorConfig()) -> SolutionTrace:
    """Integrate along ``path`` crossing every pole met on the way."""
    nf = default_series(cfg) if nf is None else nf
    trace = SolutionTrace()
    s, state, I = 0.0, ic, 0j
    eps1 = cfg.eps1
    refinements = 0
    L = path.total_length
    while True:
        trace, s, z = integrate_path(state, path, cfg, s, trace, threshold=1 / eps1, I0=I)
        if trace.status == "end":
            return trace
        x = path.locate(s)[0]
        state = P1Point(x, complex(z[0]), complex(z[1]))
        dec = handoff_detect(state, cfg, eps1)
        trace.catalog.events.append({"kind": dec.decision, "x": [x.real, x.imag], "s": s, "eps1": eps1, "margins": {k: float(v) for k, v in dec.margins.items()}})
        record = sol = None
        if dec.decision == "handoff":
            try:
                record, sol, _ = continue_through_pole(trace, nf, cfg, eps1)
            except ContractionError as exc:
                trace.catalog.events.append({"kind": "contraction", "x": [x.real, x.imag], "s": s, "eps1": eps1, "detail": str(exc)})
            except NoPoleError:
                trace.catalog.events.append({"kind": "graze", "x": [x.real, x.imag], "s": s, "eps1": eps1})
        if record is None:
            if refinements >= cfg.eps1_refinements:
                raise IntegrationError("singular approach outside equivalence region")
            refinements += 1
            eps1 /= 10
            I = complex(z[2])
            continue
        rho = 4 * math.sqrt(eps1)
        s2 = min(s + rho, L)
        x2 = path.locate(s2)[0]
        if path.detour == "elliptic":
            y2, yp2 = sol(x2)
            # int y dx across the disk from the first integral at both ends
            C = first_integral_value(x, z[0], z[1], z[2])
            I2 = (C - yp2 * yp2 + 4 * y2**3 + 2 * x2 * y2) / 2
            trace.new_run()
            trace.append(s2, x2, np.array([y2, yp2, I2]))
        else:
            y2, yp2, I2 = _detour(trace, z, s, s2, x, x2, path.detour, cfg)
        # the bound holds on the exit circle; a path ending inside the disk is exempt
        if s + rho <= L and abs(y2) >= 1 / eps1:
            raise HandoffError("handoff inconsistency: |y| >= 1/eps1 at exit point", {"y_exit": abs(y2), "bound": 1 / eps1})
        record.chart_data["x2"] = complex(x2)
        trace.catalog.poles.append(record)
        trace.solutions.append(sol)
        state, s, I = P1Point(x2, complex(y2), complex(yp2)), s2, complex(I2)
        eps1, refinements = cfg.eps1, 0
        if s2 >= L:
            trace.status = "end"
            return trace


def loop_around(state: P1Point, center: complex, cfg: IntegratorConfig = IntegratorConfig(), turns: int = 1) -> tuple[complex, complex]:
    """Integrate directly around the circle through ``state`` centred at ``center``."""
    r = abs(state.x - center)
    a0 = np.angle(state.x - center)
    curve = lambda phi: center + r * np.exp(1j * (a0 + phi))  # noqa: E731
    dcurve = lambda phi: 1j * r * np.exp(1j * (a0 + phi))  # noqa: E731
    tr = SolutionTrace()
    _, z, _ = _integrate_curve(tr, [state.y, state.yp, 0j], curve, dcurve, 0.0, 2 * math.pi * turns, cfg)
    return complex(z[0]), complex(z[1])


def direct_pole(ic: P1Point, path: PathSpec, cfg: IntegratorConfig = IntegratorConfig(), y_start: float = 1e2, y_stop: float = 1e6, shrink: float = 0.5):
    """Pole location by direct integration only (no normal form).

    Integrates along ``path`` until |y| = y_start, then repeatedly moves a
    fraction ``shrink`` of the way toward p = x + 2 y / y' (the zero of
    y^(-1/2) by Newton) until |y| >= y_stop.  Returns (p, history).
    """
    trace, s, z = integrate_path(ic, path, cfg, threshold=y_start)
    if trace.status != "handoff":
        raise IntegrationError(f"|y| never reached {y_start} along the path")
    x = path.locate(s)[0]
    y, yp = complex(z[0]), complex(z[1])
    hist = []
    while True:
        p = x + 2 * y / yp
        hist.append(p)
        if abs(y) >= y_stop:
            return p, hist
        target = x + shrink * (p - x)
        d = target - x
        curve = lambda q, x=x, d=d: x + q * d  # noqa: E731
        dcurve = lambda q, d=d: d  # noqa: E731
        _, zz, _ = _integrate_curve(SolutionTrace(), [y, yp, 0j], curve, dcurve, 0.0, 1.0, cfg)
        x, y, yp = target, complex(zz[0]), complex(zz[1])


def _cell(args):
    idx, ic, template, nf, cfg = args
    path = replace(template, start=ic.x)
    try:
        tr = run_path(ic, path, nf, cfg)
        return {"index": idx, "status": tr.status, "catalog": tr.catalog.to_dict(), "end": [tr.x[-1].real, tr.x[-1].imag, tr.y[-1].real, tr.y[-1].imag, tr.yp[-1].real, tr.yp[-1].imag]}
    except Exception as exc:  # per-cell failures are data
        return {"index": idx, "status": "error", "error": f"{type(exc).__name__}: {exc}"}


def pole_map(grid, template: PathSpec, nf: NormalFormSeries | None = None, cfg: IntegratorConfig = IntegratorConfig(), workers: int = 1) -> list[dict]:
    """Run every initial condition in ``grid`` along a copy of ``template``.

    ``grid`` is a sequence of P1Point (or (index, P1Point) pairs); the result is
    ordered by index whatever the execution order.
    """
    nf = default_series(cfg) if nf is None else nf
    items = list(grid)
    if items and isinstance(items[0], P1Point):
        items = list(enumerate(items))
    jobs = [(i, ic, template, nf, cfg) for i, ic in items]
    if workers > 1:
        with cf.ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_cell, jobs))
    else:
        out = [_cell(j) for j in jobs]
    return sorted(out, key=lambda r: r["index"])
