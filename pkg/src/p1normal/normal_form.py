"""Order-by-order solution of the normal-form equation for gamma.

The map Gamma(t, v, w) = (gamma, eta, theta) conjugates the chart form of
y'' = 6 y**2 + f(x) to that of u'' = 6 u**2 iff gamma solves

    v L^2 gamma + 6 L gamma - (6 + w^2 v^4 f(gamma)) (L gamma)^3 = 0,

with eta = v / L gamma and theta = v^2 w / eta^2 = w (L gamma)^2.  Writing
gamma = t + sum_k gamma_k(t, w) v^k and gamma_k = sum_n gamma_{k,n}(t) s^n
(s = w - 1/4) turns this into the triangular recurrence

    D(k, n) gamma_{k+1,n} = h_{k,n} - sum_{p<n} (p f_{k,n-p} + g_{k,n-p}) gamma_{k+1,p}

with D(k, n) = 144 n (n-1) + 24 (2k+1) n + 4 (k+1)(k-6).  D vanishes only at
(k, n) = (6, 0); there h_{6,0} must vanish identically in t, and gamma_{7,0}
is free (the gauge).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .series import TPoly, VSeries, WSeries, apply_L, inv_w, w_series

__all__ = [
    "Forcing",
    "P1",
    "NormalFormSeries",
    "ResonanceReport",
    "ObstructionError",
    "divisor",
    "indicial_exponents",
    "f_series",
    "g_series",
    "compute_hk",
    "extract_hk",
    "pde_residual",
    "residual_pde",
    "solve_normal_form",
    "resonance_residual",
    "CompatibilityReport",
    "painleve_test",
    "GrowthReport",
    "series_norm",
    "norm_and_growth",
]

RESONANCE = (6, 0)


class ObstructionError(ArithmeticError):
    """The k = 6 compatibility condition fails; ``residual`` is h_{6,0}(tau)."""

    def __init__(self, residual: TPoly):
        super().__init__(f"logarithmic obstruction at k=6: h_6,0 = {_fmt_poly(residual)}")
        self.residual = residual


def _fmt_poly(p: TPoly, var: str = "tau") -> str:
    if not p:
        return "0"
    terms = []
    for i, c in enumerate(p.coeffs):
        if not c:
            continue
        mono = "" if i == 0 else (var if i == 1 else f"{var}^{i}")
        if mono:
            terms.append(f"{c}*{mono}" if c != 1 else mono)
        else:
            terms.append(str(c))
    return " + ".join(terms)


_TERM = re.compile(r"^([+-]?)([0-9/]*)\*?(x(?:(?:\^|\*\*)(\d+))?)?$")


@dataclass(frozen=True)
class Forcing:
    """Polynomial forcing f(x) = sum c_m x^m in y'' = 6 y^2 + f(x)."""

    coeffs: tuple = (Fraction(0), Fraction(1))

    def __post_init__(self):
        c = [Fraction(x) for x in self.coeffs]
        while c and not c[-1]:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def parse(cls, text: str) -> "Forcing":
        """Parse strings such as ``x``, ``x^2``, ``2x+1``, ``x**3 - 1/2``."""
        s = text.replace(" ", "")
        if not s:
            raise ValueError("empty forcing")
        pieces = re.findall(r"[+-]?[^+-]+", s)
        if "".join(pieces) != s:
            raise ValueError(f"cannot parse forcing {text!r}")
        coeffs: dict[int, Fraction] = {}
        for piece in pieces:
            m = _TERM.match(piece)
            if not m or (not m.group(2) and not m.group(3)):
                raise ValueError(f"cannot parse forcing term {piece!r}")
            sign, num, xpart, power = m.groups()
            c = Fraction(num) if num else Fraction(1)
            if sign == "-":
                c = -c
            deg = 0 if not xpart else int(power or 1)
            coeffs[deg] = coeffs.get(deg, Fraction(0)) + c
        top = max(coeffs)
        return cls(tuple(coeffs.get(i, Fraction(0)) for i in range(top + 1)))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __str__(self):
        return _fmt_poly(TPoly(self.coeffs), "x")

    def poly(self) -> TPoly:
        return TPoly(self.coeffs)

    def taylor(self, x0=0) -> list[TPoly]:
        """[f^(r)(x0 + tau) / r!  for r = 0..deg] as polynomials in tau."""
        p = self.poly().shift(x0)
        out = []
        r_fact = 1
        for r in range(max(self.degree, 0) + 1):
            if r:
                r_fact *= r
            out.append(p / r_fact)
            p = p.deriv()
        return out

    def __call__(self, x):
        return self.poly()(x)


P1 = Forcing((0, 1))


def divisor(k: int, n: int) -> int:
    return 144 * n * (n - 1) + 24 * (2 * k + 1) * n + 4 * (k + 1) * (k - 6)


def indicial_exponents(k: int) -> tuple[Fraction, Fraction]:
    return (1 - Fraction(k, 6), Fraction(-1, 6) - Fraction(k, 6))


def f_series(k: int, N: int) -> WSeries:
    """f_k(w) = 12(2k+1)(2/w - 6) expanded in s."""
    return (inv_w(N) * 2 - 6) * (12 * (2 * k + 1))


def g_series(k: int, N: int) -> WSeries:
    """g_k(w) = (k+1)[2(2k+3)/w^2 - 24(k+2)/w + 36(k+2)] expanded in s."""
    iw = inv_w(N)
    return (iw * iw * (2 * (2 * k + 3)) - iw * (24 * (k + 2)) + 36 * (k + 2)) * (k + 1)


def _x0(x0) -> Fraction:
    if isinstance(x0, complex):
        if x0.imag:
            raise ValueError("exact solve needs a real rational center; evaluate off-axis points numerically")
        x0 = x0.real
    return Fraction(x0)


def _L_coeff(gammas: dict, j: int, A: WSeries, N: int) -> WSeries:
    """L_j = d_t gamma_j [j>=5] + 12 s d_w gamma_{j+1} + (j+1)(2/w - 6) gamma_{j+1}."""
    out = WSeries.zero(N)
    gj = gammas.get(j)
    if gj is not None and j >= 5:
        out = out + gj.deriv_t()
    gn = gammas.get(j + 1)
    if gn is not None:
        out = out + gn.euler_w() * 12 + A * gn * (j + 1)
    return out


def _forcing_coeffs(gammas: dict, upto: int, forcing: Forcing, x0: Fraction, N: int) -> dict:
    """v-coefficients F_0..F_upto of f(gamma) = sum_r f^(r)(t)/r! (gamma - t)^r."""
    taylor = forcing.taylor(x0)
    if not taylor:
        return {}
    delta = VSeries({p: g for p, g in gammas.items() if p <= upto}, K=upto, N=N)
    acc = VSeries.const(WSeries.const(taylor[-1], N), upto, N)
    for c in reversed(taylor[:-1]):
        acc = acc * delta + WSeries.const(c, N)
    return acc.coeffs


def compute_hk(gammas: dict, k: int, forcing: Forcing = P1, N: int | None = None, x0=0) -> WSeries:
    """Right-hand side h_k of P_k gamma_{k+1} = h_k from the explicit convolutions.

    ``gammas`` maps j -> gamma_j (WSeries) and must contain every j in 5..k.
    Index conventions: L indices run over i >= 4 and gamma indices over p >= 5.
    """
    for j in range(5, k + 1):
        if j not in gammas:
            raise KeyError(f"gamma_{j} must be solved before h_{k}")
    if N is None:
        N = min((g.N for g in gammas.values()), default=0)
    x0 = _x0(x0)
    A = inv_w(N) * 2 - 6
    w2 = w_series(N) ** 2
    L = {i: _L_coeff(gammas, i, A, N) for i in range(4, k - 3)}

    def s2(m):
        acc = WSeries.zero(N)
        for i in range(4, m - 3):
            acc = acc + L[i] * L[m - i]
        return acc

    def s3(m):
        acc = WSeries.zero(N)
        for i in range(4, m - 7):
            for j in range(4, m - i - 3):
                acc = acc + L[i] * L[j] * L[m - i - j]
        return acc

    def cube_part(b):
        # coefficient of v^b in (L gamma)^3 - 1, i.e. 3 L_b + 3 sum L L + sum L L L
        if b < 4:
            return WSeries.zero(N)
        return L[b] * 3 + s2(b) * 3 + s3(b)

    F = _forcing_coeffs(gammas, k - 4, forcing, x0, N)
    F0 = F.get(0, WSeries.zero(N))

    h = s2(k) * 18 + s3(k) * 6
    if k == 4:
        h = h + w2 * F0
    forced = F0 * cube_part(k - 4)
    for p in range(5, k - 3):
        Fp = F.get(p)
        if Fp is None:
            continue
        forced = forced + Fp * (1 if p == k - 4 else cube_part(k - 4 - p))
    h = h + w2 * forced

    gk = gammas.get(k)
    if gk is not None and k >= 5:
        dtg = gk.deriv_t()
        h = h + dtg * 12 - A * dtg * (2 * k) - dtg.euler_w() * 24
    gkm = gammas.get(k - 1)
    if gkm is not None and k - 1 >= 5:
        h = h - gkm.deriv_t().deriv_t()
    return h.truncate(N)


def pde_residual(gamma: VSeries, forcing: Forcing = P1, x0=0) -> VSeries:
    """Left side of the gamma equation for a truncated gamma, by plain series algebra."""
    x0 = _x0(x0)
    N = gamma.N
    G = apply_L(gamma)
    LG = apply_L(G)
    taylor = forcing.taylor(x0)
    delta = gamma - VSeries.const(WSeries.const(TPoly((x0, 1)), N), gamma.K, N)
    if taylor:
        fg = VSeries.const(WSeries.const(taylor[-1], N), gamma.K, N)
        for c in reversed(taylor[:-1]):
            fg = fg * delta + WSeries.const(c, N)
    else:
        fg = VSeries({}, gamma.K, N)
    w2 = w_series(N) ** 2
    cube = G * G * G
    return LG.shift(1) + G * 6 - cube * 6 - (fg * w2).shift(4) * cube


def extract_hk(gammas: dict, k: int, forcing: Forcing = P1, N: int | None = None, x0=0) -> WSeries:
    """h_k recomputed as minus the v^k coefficient of the residual with gamma_{k+1} = 0."""
    if N is None:
        N = min((g.N for g in gammas.values()), default=0)
    x0 = _x0(x0)
    coeffs = {0: WSeries.const(TPoly((x0, 1)), N)}
    coeffs.update({j: g for j, g in gammas.items() if 5 <= j <= k})
    gamma = VSeries(coeffs, K=k + 1, N=N)
    return -pde_residual(gamma, forcing, x0)[k]


@dataclass
class NormalFormSeries:
    """Truncated normal-form map; the gamma equation holds exactly through v^K, s^N."""

    gamma: VSeries
    eta: VSeries
    theta: VSeries
    Lgamma: VSeries
    K: int
    N: int
    forcing: Forcing = P1
    gauge_gamma7_0: Fraction = Fraction(0)
    x0: Fraction = Fraction(0)

    def gamma_k(self, k: int) -> WSeries:
        return self.gamma[k]

    @property
    def gammas(self) -> dict:
        return {k: g for k, g in self.gamma.coeffs.items() if k >= 5}


@dataclass
class ResonanceReport:
    divisor_table: dict
    resonance_sites: list
    compatibility_residual: TPoly
    passes: bool
    indicial_exponents: dict = field(default_factory=dict)

    def summary(self) -> str:
        verdict = "passes" if self.passes else "fails"
        return f"k=6 compatibility {verdict}: h_6,0 = {_fmt_poly(self.compatibility_residual)}"


def _solve_gammas(forcing, K, N, gauge, x0, *, raise_on_obstruction=True, check_hk=False):
    """Run the recurrence for k = 4..K; returns (gammas, h_{6,0} or None)."""
    gauge = Fraction(gauge)
    fser = {}
    gser = {}
    gammas: dict[int, WSeries] = {}
    h60 = None
    for k in range(4, K + 1):
        h = compute_hk(gammas, k, forcing, N, x0)
        if check_hk:
            alt = extract_hk(gammas, k, forcing, N, x0)
            if alt != h:
                raise AssertionError(f"h_{k} disagrees between explicit and residual paths")
        fser[k] = f_series(k, N)
        gser[k] = g_series(k, N)
        fk = [fser[k][j][0] for j in range(N + 1)]
        gk = [gser[k][j][0] for j in range(N + 1)]
        sol = []
        for n in range(N + 1):
            rhs = h[n]
            for p in range(n):
                coef = p * fk[n - p] + gk[n - p]
                if coef and sol[p]:
                    rhs = rhs - sol[p] * coef
            d = divisor(k, n)
            if d == 0:
                h60 = rhs
                if rhs and raise_on_obstruction:
                    raise ObstructionError(rhs)
                sol.append(TPoly.const(gauge))
            else:
                sol.append(rhs / d)
        gammas[k + 1] = WSeries(sol, N)
    return gammas, h60


def solve_normal_form(forcing: Forcing = P1, K: int = 8, N: int = 4, gauge=0, x0=0, *, check_hk: bool = False) -> NormalFormSeries:
    """Solve for gamma_5..gamma_{K+1} through s^N and derive eta, theta.

    ``K`` is the highest order in v at which the gamma equation is enforced, so
    gamma is known through v^{K+1}, L gamma and theta through v^K and eta
    through v^{K+1}.  Raises ``ObstructionError`` if h_{6,0} is not identically
    zero.
    """
    if K < 5 or N < 1:
        raise ValueError("need K >= 5 and N >= 1")
    x0 = _x0(x0)
    gammas, _ = _solve_gammas(forcing, K, N, gauge, x0, check_hk=check_hk)
    coeffs = {0: WSeries.const(TPoly((x0, 1)), N)}
    coeffs.update(gammas)
    gamma = VSeries(coeffs, K=K + 1, N=N)
    Lg = apply_L(gamma)
    eta = Lg.inverse().shift(1)
    theta = Lg * Lg * w_series(N)
    return NormalFormSeries(
        gamma=gamma,
        eta=eta,
        theta=theta,
        Lgamma=Lg,
        K=K,
        N=N,
        forcing=forcing,
        gauge_gamma7_0=Fraction(gauge),
        x0=x0,
    )


def residual_pde(nf: NormalFormSeries) -> VSeries:
    return pde_residual(nf.gamma, nf.forcing, nf.x0)


def resonance_residual(forcing: Forcing, N: int = 2, x0=0, K_table: int | None = None) -> ResonanceReport:
    """Run the recurrence through k = 6 and report the compatibility residual h_{6,0}."""
    x0 = _x0(x0)
    _, h60 = _solve_gammas(forcing, 6, N, 0, x0, raise_on_obstruction=False)
    K_table = 6 if K_table is None else K_table
    table = {(k, n): divisor(k, n) for k in range(4, K_table + 1) for n in range(N + 1)}
    sites = sorted(kn for kn, d in table.items() if d == 0)
    return ResonanceReport(
        divisor_table=table,
        resonance_sites=sites,
        compatibility_residual=h60,
        passes=not h60,
        indicial_exponents={k: indicial_exponents(k) for k in range(4, K_table + 1)},
    )


@dataclass
class CompatibilityReport:
    """Classical Laurent test: y = sum a_j z^(j-2) about a movable pole at x0."""

    laurent_coeffs: list
    resonance_residual: TPoly
    passes: bool

    def summary(self) -> str:
        verdict = "passes" if self.passes else "fails"
        return f"Laurent j=6 compatibility {verdict}: residual = {_fmt_poly(self.resonance_residual, 'x0')}"


def painleve_test(forcing: Forcing, J: int = 8) -> CompatibilityReport:
    """Laurent ansatz for y'' = 6 y^2 + f(x0 + z); coefficients are polynomials in x0.

    (j - 6)(j + 1) a_j = 6 sum_{0<i<j} a_i a_{j-i} + [z^(j-4)] f(x0 + z), a_0 = 1.
    At j = 6 the left side vanishes; the right side is the residual and a_6 is
    set to zero.
    """
    if J < 6:
        raise ValueError("need J >= 6")
    taylor = forcing.taylor(0)
    a = [TPoly.const(1)]
    residual = TPoly.const(0)
    for j in range(1, J + 1):
        rhs = TPoly.const(0)
        for i in range(1, j):
            rhs = rhs + a[i] * a[j - i] * 6
        if 0 <= j - 4 < len(taylor):
            rhs = rhs + taylor[j - 4]
        if j == 6:
            residual = rhs
            a.append(TPoly.const(0))
        else:
            a.append(rhs / ((j - 6) * (j + 1)))
    return CompatibilityReport(laurent_coeffs=a, resonance_residual=residual, passes=not residual)


def series_norm(psi: WSeries, eps: float, samples: int = 256) -> float:
    """sum_j sup_{|s| = eps} |psi_j(s)|, with psi = sum_j psi_j(s) tau^j.

    The sup is estimated on ``samples`` equispaced boundary points (a lower
    bound for the true sup of the truncated polynomial).
    """
    if not 0 < eps < 0.25:
        raise ValueError("eps outside the admissible disk (need 0 < eps < 1/4)")
    s = eps * np.exp(2j * np.pi * np.arange(samples) / samples)
    deg = psi.t_degree
    total = 0.0
    for j in range(deg + 1):
        cs = [float(psi[n][j]) if n <= psi.N else 0.0 for n in range(psi.N + 1)]
        vals = np.polynomial.polynomial.polyval(s, cs)
        total += float(np.max(np.abs(vals)))
    return total


@dataclass
class GrowthReport:
    eps: float
    norms: dict
    ratios: dict
    bridged_ratios: dict
    C: float
    R: float

    @property
    def max_ratio(self) -> float:
        return max(self.ratios.values()) if self.ratios else float("nan")

    def summary(self) -> str:
        return f"growth fit: C={self.C:.6g} R={self.R:.6g} max_ratio={self.max_ratio:.6g} (eps={self.eps})"


def norm_and_growth(nf: NormalFormSeries, eps: float = 0.05, samples: int = 256) -> GrowthReport:
    """Norms of gamma_k and a least-squares fit of |||gamma_k||| k^{3/2} ~ C R^{k-5}.

    ``ratios[k]`` is the literal consecutive ratio (inf when gamma_k vanishes);
    ``bridged_ratios`` takes the geometric mean of the ratio across runs of
    vanishing coefficients, which are structural for P1.
    """
    if not 0 < eps < 0.25:
        raise ValueError("eps outside the admissible disk (need 0 < eps < 1/4)")
    ks = list(range(5, nf.K + 2))
    norms = {k: series_norm(nf.gamma[k], eps, samples) for k in ks}
    scaled = {k: norms[k] * k**1.5 for k in ks}
    ratios = {}
    for k in ks:
        if k + 1 in scaled:
            ratios[k] = scaled[k + 1] / scaled[k] if scaled[k] else float("inf")
    live = [k for k in ks if scaled[k] > 0]
    bridged = {}
    for a, b in zip(live, live[1:]):
        bridged[a] = (scaled[b] / scaled[a]) ** (1.0 / (b - a))
    if len(live) >= 2:
        x = np.array(live, dtype=float) - 5
        y = np.log([scaled[k] for k in live])
        slope, icpt = np.polyfit(x, y, 1)
        C, R = float(np.exp(icpt)), float(np.exp(slope))
    else:
        C = R = float("nan")
    return GrowthReport(eps=eps, norms=norms, ratios=ratios, bridged_ratios=bridged, C=C, R=R)
