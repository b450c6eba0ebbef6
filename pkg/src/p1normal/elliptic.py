"""Local solution of u'' = 6 u^2 near a double pole.

With u = 1/Q^2 the first integral (u')^2 = 4 u^3 + 4 K1 becomes
(Q')^2 = 1 + K1 Q^6, so Q' = sigma sqrt(1 + K1 Q^6) with sigma = +-1 and

    Q(t) = Q1 + sigma (t - t1) + U(t),
    U(t) = sigma int_{t1}^t K1 Q^6 / (1 + sqrt(1 + K1 Q^6)) ds =: J(U)(t).

J is iterated to its fixed point along straight segments from t1 with a
Chebyshev spectral integrator; the square root is tracked by continuity
from its principal value at t1.  Poles of u are the zeros of Q.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C

__all__ = [
    "ContractionError",
    "NoPoleError",
    "EllipticLocal",
    "PoleRecord",
    "first_integral",
    "to_Q",
    "iterate_J",
    "locate_pole",
]


class ContractionError(ArithmeticError):
    pass


class NoPoleError(ArithmeticError):
    pass


def first_integral(u: complex, uprime: complex) -> complex:
    """K1 = (u'^2 - 4 u^3) / 4, constant along solutions of u'' = 6 u^2."""
    return (uprime * uprime - 4 * u**3) / 4


def to_Q(u: complex, uprime: complex, branch: int = 1) -> tuple[complex, complex]:
    """Q = u^(-1/2) on the chosen branch and Q' = -u' Q^3 / 2."""
    if u == 0:
        raise ValueError("u = 0 has no Q representation")
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    Q = branch / cmath.sqrt(complex(u))
    return Q, -complex(uprime) * Q**3 / 2


@lru_cache(maxsize=16)
def _cheb_ops(n: int):
    """Nodes on [-1, 1], node-to-node integration matrix from -1, end-point row."""
    x = np.sort(C.chebpts1(n))
    Vinv = np.linalg.inv(C.chebvander(x, n - 1))
    integ = np.zeros((n + 1, n))
    for m in range(n):
        e = np.zeros(n)
        e[m] = 1.0
        integ[:, m] = C.chebint(e, lbnd=-1)
    M = C.chebvander(x, n) @ integ @ Vinv
    end = C.chebvander(np.array([1.0]), n)[0] @ integ @ Vinv
    return x, M, end


def _tracked_sqrt(z: np.ndarray, start: complex) -> np.ndarray:
    out = np.sqrt(z.astype(complex))
    prev = start
    for i in range(len(out)):
        if abs(out[i] - prev) > abs(out[i] + prev):
            out[i] = -out[i]
        prev = out[i]
    return out


@dataclass
class PoleRecord:
    """A located double pole with its elliptic constant and checks."""

    p: complex
    K1: complex
    source: str
    residual_check: float
    probe_radius: float
    error_estimate: float = 0.0
    chart_data: dict = field(default_factory=dict)
    margins: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def c(z):
            return [float(np.real(z)), float(np.imag(z))]

        return {
            "p": c(self.p),
            "K1": c(self.K1),
            "source": self.source,
            "residual_check": float(self.residual_check),
            "probe_radius": float(self.probe_radius),
            "error_estimate": float(self.error_estimate),
            "chart_data": {k: c(v) if isinstance(v, complex) else v for k, v in self.chart_data.items()},
            "margins": {k: float(v) for k, v in self.margins.items()},
        }


@dataclass
class EllipticLocal:
    t1: complex
    Q1: complex
    Q1prime: complex
    K1: complex
    radius: float
    eps1: float = 1e-4
    sigma: int = 1
    n_ang: int = 24
    n_rad: int = 12
    seg_nodes: int = 24
    grid: np.ndarray | None = None
    U: np.ndarray | None = None
    contraction: float = 0.0
    iterations: int = 0
    converged: bool = False

    @classmethod
    def from_point(cls, t1, u1, up1, eps1: float = 1e-4, branch: int = 1, radius: float | None = None, **kw) -> "EllipticLocal":
        Q1, Q1p = to_Q(u1, up1, branch)
        K1 = first_integral(complex(u1), complex(up1))
        s0 = cmath.sqrt(1 + K1 * Q1**6)
        sigma = 1 if (Q1p / s0).real > 0 else -1
        if radius is None:
            radius = 8 * math.sqrt(eps1)
        return cls(complex(t1), Q1, Q1p, K1, radius, eps1, sigma, **kw)

    @property
    def ball(self) -> float:
        return self.eps1**2

    def _solve_segment(self, t_end: complex, n: int, maxiter: int = 200, tol: float = 1e-15):
        """Fixed point of J on [t1, t_end]; returns (t nodes, U nodes, U(t_end), Q'(t_end), history)."""
        x, M, end = _cheb_ops(n)
        d = complex(t_end) - self.t1
        t = self.t1 + (x + 1) / 2 * d
        lin = self.Q1 + self.sigma * (t - self.t1)
        lin_end = self.Q1 + self.sigma * d
        s0 = cmath.sqrt(1 + self.K1 * self.Q1**6)
        U = np.zeros(n, dtype=complex)
        U_end = 0j
        hist = []
        for _ in range(maxiter):
            Q = lin + U
            q6 = self.K1 * Q**6
            S = _tracked_sqrt(1 + q6, s0)
            g = q6 / (1 + S)
            scale = self.sigma * d / 2
            U_new = scale * (M @ g)
            U_end = scale * (end @ g)
            diff = float(np.max(np.abs(U_new - U))) if n else 0.0
            hist.append((diff, float(np.max(np.abs(U_new)))))
            U = U_new
            if diff <= tol:
                break
            if len(hist) > 3 and diff > hist[-2][0] > hist[-3][0]:
                raise ContractionError("outside contraction regime (iteration diverges)")
        else:
            raise ContractionError("outside contraction regime (no convergence)")
        Q_end = lin_end + U_end
        S_end = _tracked_sqrt(np.array([1 + self.K1 * Q_end**6]), S[-1] if n else s0)[0]
        return t, U, U_end, self.sigma * S_end, hist

    def Q(self, t: complex) -> tuple[complex, complex]:
        """(Q, Q') at t by a spectral Picard solve along [t1, t]."""
        if t == self.t1:
            return self.Q1, self.Q1prime
        _, _, U_end, Qp, _ = self._solve_segment(t, self.seg_nodes)
        return self.Q1 + self.sigma * (complex(t) - self.t1) + U_end, Qp

    def u(self, t: complex) -> tuple[complex, complex]:
        Q, Qp = self.Q(t)
        return 1 / (Q * Q), -2 * Qp / Q**3

    def chart(self, t: complex) -> tuple[complex, complex, complex, complex]:
        """(Q, Q', v, w) at t; v = 2 Q Q' and w = 1/(4 Q'^2) stay regular at the pole."""
        Q, Qp = self.Q(t)
        return Q, Qp, 2 * Q * Qp, 1 / (4 * Qp * Qp)

    def ode_residual(self, t: complex) -> float:
        Q, Qp = self.Q(t)
        return abs(Qp * Qp - 1 - self.K1 * Q**6)


def iterate_J(local: EllipticLocal, check_ball: bool = True) -> EllipticLocal:
    """Run J to its fixed point on the polar grid of the disk |t - t1| <= radius.

    Each ray is an independent fixed-point problem; ``contraction`` records the
    worst observed ratio of successive update sizes.
    """
    if local.radius <= 0:
        raise ValueError("radius must be positive")
    phis = 2 * np.pi * np.arange(local.n_ang) / local.n_ang
    grid = np.empty((local.n_ang, local.n_rad), dtype=complex)
    U = np.empty_like(grid)
    worst, iters = 0.0, 0
    for i, phi in enumerate(phis):
        t_end = local.t1 + local.radius * np.exp(1j * phi)
        t, Ui, _, _, hist = local._solve_segment(t_end, local.n_rad)
        if check_ball and hist[0][1] > local.ball:
            raise ContractionError(f"outside contraction regime: |J(0)| = {hist[0][1]:.3e} > eps1^2 = {local.ball:.3e}")
        grid[i], U[i] = t, Ui
        iters = max(iters, len(hist))
        for (a, _), (b, _) in zip(hist, hist[1:]):
            if a > 1e-13:
                worst = max(worst, b / a)
    local.grid, local.U = grid, U
    local.contraction, local.iterations, local.converged = worst, iters, True
    return local


def locate_pole(local: EllipticLocal, probe: float = 1e-2, maxiter: int = 50) -> PoleRecord:
    """Zero of Q inside the disk by Newton from t1 - Q1/Q1'."""
    t = local.t1 - local.Q1 / local.Q1prime
    step = math.inf
    for _ in range(maxiter):
        Q, Qp = local.Q(t)
        step = Q / Qp
        t -= step
        if abs(step) <= 1e-15 * max(1.0, abs(t)):
            break
    if not np.isfinite(t) or abs(t - local.t1) >= local.radius:
        raise NoPoleError("no pole in handoff disk")
    direction = (local.t1 - t) / abs(local.t1 - t) if local.t1 != t else 1.0
    tp = t + probe * direction
    u, _ = local.u(tp)
    return PoleRecord(
        p=complex(t),
        K1=local.K1,
        source="elliptic",
        residual_check=abs(u * (tp - t) ** 2 - 1),
        probe_radius=probe,
        error_estimate=abs(step),
    )
