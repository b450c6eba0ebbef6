"""Exact truncated series used by the normal-form recurrence.

Three nested layers, all with rational coefficients:

* ``TPoly``   -- polynomial in tau = t - x0
* ``WSeries`` -- truncated power series in s = w - 1/4 with ``TPoly`` coefficients
* ``VSeries`` -- truncated power series in v with ``WSeries`` coefficients

Every series carries its truncation order; binary operations truncate to the
smaller order.  Nothing here ever touches a float.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping

Rational = Fraction

__all__ = [
    "Rational",
    "TPoly",
    "WSeries",
    "VSeries",
    "mul",
    "divide",
    "inv_w",
    "w_series",
    "derive",
    "apply_L",
    "NotAUnitError",
    "UncancelledPoleError",
]


class NotAUnitError(ZeroDivisionError):
    pass


class UncancelledPoleError(ValueError):
    pass


def _q(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _trim(c: list) -> tuple:
    n = len(c)
    while n and not c[n - 1]:
        n -= 1
    return tuple(c[:n])


def _padd(a: tuple, b: tuple) -> tuple:
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, x in enumerate(b):
        out[i] += x
    return _trim(out)


def _psub(a: tuple, b: tuple) -> tuple:
    out = list(a) + [0] * (len(b) - len(a))
    for i, x in enumerate(b):
        out[i] -= x
    return _trim(out)


def _pmul(a: tuple, b: tuple) -> tuple:
    if not a or not b:
        return ()
    if len(a) == 1:
        c = a[0]
        return tuple(c * x for x in b)
    if len(b) == 1:
        c = b[0]
        return tuple(c * x for x in a)
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return _trim(out)


class TPoly:
    """Polynomial in tau with exact rational coefficients, lowest degree first."""

    __slots__ = ("c",)

    def __init__(self, coeffs: Iterable = ()):
        self.c = _trim([_q(x) for x in coeffs])

    @classmethod
    def _raw(cls, c: tuple) -> "TPoly":
        p = cls.__new__(cls)
        p.c = c
        return p

    @classmethod
    def const(cls, x) -> "TPoly":
        return cls((x,))

    @property
    def coeffs(self) -> tuple:
        return self.c

    @property
    def degree(self) -> int:
        """Degree in tau; -1 for the zero polynomial."""
        return len(self.c) - 1

    def __bool__(self):
        return bool(self.c)

    def __eq__(self, other):
        if isinstance(other, TPoly):
            return self.c == other.c
        if isinstance(other, (int, Fraction)):
            return self.c == _trim([_q(other)])
        return NotImplemented

    def __hash__(self):
        return hash(self.c)

    def __repr__(self):
        return f"TPoly({[str(x) for x in self.c]})"

    def __getitem__(self, i: int) -> Fraction:
        return self.c[i] if 0 <= i < len(self.c) else Fraction(0)

    def __neg__(self):
        return TPoly._raw(tuple(-x for x in self.c))

    def __add__(self, other):
        other = _as_tpoly(other)
        return TPoly._raw(_padd(self.c, other.c))

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_tpoly(other)
        return TPoly._raw(_psub(self.c, other.c))

    def __rsub__(self, other):
        return _as_tpoly(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return TPoly._raw(())
            return TPoly._raw(tuple(other * x for x in self.c))
        if isinstance(other, TPoly):
            return TPoly._raw(_pmul(self.c, other.c))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _q(other)
        return TPoly._raw(tuple(x / other for x in self.c))

    def __pow__(self, n: int):
        out = TPoly.const(1)
        for _ in range(n):
            out = out * self
        return out

    def deriv(self) -> "TPoly":
        return TPoly._raw(tuple(i * x for i, x in enumerate(self.c) if i))

    def __call__(self, tau):
        acc = 0
        for x in reversed(self.c):
            acc = acc * tau + x
        return acc

    def shift(self, a) -> "TPoly":
        """Return q with q(tau) = p(tau + a), exact for rational ``a``."""
        a = _q(a)
        out = TPoly()
        lin = TPoly((a, 1))
        for x in reversed(self.c):
            out = out * lin + TPoly.const(x)
        return out


def _as_tpoly(x) -> TPoly:
    if isinstance(x, TPoly):
        return x
    return TPoly.const(x)


_ZERO_POLY = TPoly()


class WSeries:
    """Truncated series in s = w - 1/4 through order ``N`` (inclusive)."""

    __slots__ = ("c", "N")

    def __init__(self, coeffs: Iterable = (), N: int = 0):
        if N < 0:
            raise ValueError("truncation order must be non-negative")
        cs = [_as_tpoly(x) for x in coeffs][: N + 1]
        while cs and not cs[-1]:
            cs.pop()
        self.c = tuple(cs)
        self.N = N

    @classmethod
    def _raw(cls, c, N: int) -> "WSeries":
        out = cls.__new__(cls)
        c = list(c[: N + 1])
        while c and not c[-1]:
            c.pop()
        out.c = tuple(c)
        out.N = N
        return out

    @classmethod
    def const(cls, x, N: int) -> "WSeries":
        return cls((_as_tpoly(x),), N)

    @classmethod
    def zero(cls, N: int) -> "WSeries":
        return cls((), N)

    @property
    def coeffs(self) -> tuple:
        return self.c

    def __getitem__(self, n: int) -> TPoly:
        return self.c[n] if 0 <= n < len(self.c) else _ZERO_POLY

    def __bool__(self):
        return bool(self.c)

    def __eq__(self, other):
        if isinstance(other, WSeries):
            return self.c == other.c
        return NotImplemented

    def __hash__(self):
        return hash(self.c)

    def __repr__(self):
        return f"WSeries({list(self.c)}, N={self.N})"

    @property
    def t_degree(self) -> int:
        return max((p.degree for p in self.c), default=-1)

    def truncate(self, N: int) -> "WSeries":
        return WSeries._raw(self.c, min(N, self.N))

    def __neg__(self):
        return WSeries._raw([-p for p in self.c], self.N)

    def __add__(self, other):
        if not isinstance(other, WSeries):
            other = WSeries.const(other, self.N)
        N = min(self.N, other.N)
        a, b = self.c[: N + 1], other.c[: N + 1]
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, p in enumerate(b):
            out[i] = out[i] + p
        return WSeries._raw(out, N)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, WSeries):
            other = WSeries.const(other, self.N)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, TPoly)):
            if not other:
                return WSeries.zero(self.N)
            return WSeries._raw([p * other for p in self.c], self.N)
        if not isinstance(other, WSeries):
            return NotImplemented
        N = min(self.N, other.N)
        a, b = self.c, other.c
        raw = [()] * min(N + 1, max(len(a) + len(b) - 1, 0))
        for i, p in enumerate(a):
            if not p.c:
                continue
            for j in range(min(len(b), N + 1 - i)):
                q = b[j].c
                if q:
                    raw[i + j] = _padd(raw[i + j], _pmul(p.c, q))
        return WSeries._raw([TPoly._raw(x) for x in raw], N)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _q(other)
        return WSeries._raw([p / other for p in self.c], self.N)

    def __pow__(self, n: int):
        out = WSeries.const(1, self.N)
        for _ in range(n):
            out = out * self
        return out

    def deriv_t(self) -> "WSeries":
        return WSeries._raw([p.deriv() for p in self.c], self.N)

    def deriv_w(self) -> "WSeries":
        """d/dw = d/ds; the result is known one order less."""
        N = max(self.N - 1, 0)
        return WSeries._raw([p * n for n, p in enumerate(self.c) if n], N)

    def euler_w(self) -> "WSeries":
        """(w - 1/4) d/dw, which keeps the truncation order."""
        return WSeries._raw([p * n for n, p in enumerate(self.c)], self.N)

    def mul_s(self, m: int = 1) -> "WSeries":
        """Multiply by s**m; the result is known through N + m."""
        return WSeries._raw([_ZERO_POLY] * m + list(self.c), self.N + m)

    def is_w_independent(self) -> bool:
        return all(not p for p in self.c[1:])

    def inverse(self) -> "WSeries":
        c0 = self[0]
        if c0.degree != 0:
            raise NotAUnitError("leading term not a unit")
        inv0 = 1 / c0[0]
        N = self.N
        out = [TPoly.const(inv0)]
        for n in range(1, N + 1):
            acc = _ZERO_POLY
            for j in range(1, n + 1):
                if j < len(self.c):
                    acc = acc + self.c[j] * out[n - j]
            out.append(acc * (-inv0))
        return WSeries._raw(out, N)

    def __call__(self, tau, s):
        acc = 0
        for p in reversed(self.c):
            acc = acc * s + p(tau)
        return acc


def inv_w(N: int) -> WSeries:
    """1/w expanded about w = 1/4: sum of 4 (-4)^n s^n."""
    return WSeries._raw([TPoly.const(4 * (-4) ** n) for n in range(N + 1)], N)


def w_series(N: int) -> WSeries:
    """w itself, 1/4 + s."""
    return WSeries((Fraction(1, 4), 1), N)


class VSeries:
    """Truncated series in v through order ``K``, stored sparsely."""

    __slots__ = ("c", "K", "N")

    def __init__(self, coeffs: Mapping[int, WSeries] | None = None, K: int = 0, N: int | None = None):
        coeffs = dict(coeffs or {})
        if N is None:
            N = min((x.N for x in coeffs.values()), default=0)
        self.K = K
        self.N = N
        trimmed = {k: x.truncate(N) for k, x in sorted(coeffs.items()) if 0 <= k <= K}
        self.c = {k: x for k, x in trimmed.items() if x}

    @classmethod
    def _raw(cls, c: dict, K: int, N: int) -> "VSeries":
        out = cls.__new__(cls)
        out.c = {k: x for k, x in sorted(c.items()) if k <= K and x}
        out.K = K
        out.N = N
        return out

    @classmethod
    def const(cls, x, K: int, N: int) -> "VSeries":
        if not isinstance(x, WSeries):
            x = WSeries.const(x, N)
        return cls({0: x}, K, N)

    @classmethod
    def monomial(cls, k: int, K: int, N: int, coeff=1) -> "VSeries":
        if not isinstance(coeff, WSeries):
            coeff = WSeries.const(coeff, N)
        return cls({k: coeff}, K, N)

    @property
    def coeffs(self) -> dict:
        return dict(self.c)

    def __getitem__(self, k: int) -> WSeries:
        return self.c.get(k) or WSeries.zero(self.N)

    def __bool__(self):
        return bool(self.c)

    def __eq__(self, other):
        if isinstance(other, VSeries):
            return self.c == other.c
        return NotImplemented

    def __repr__(self):
        return f"VSeries({self.c}, K={self.K}, N={self.N})"

    def valuation(self) -> int | None:
        return min(self.c, default=None)

    def truncate(self, K: int | None = None, N: int | None = None) -> "VSeries":
        K = self.K if K is None else min(K, self.K)
        N = self.N if N is None else min(N, self.N)
        return VSeries._raw({k: x.truncate(N) for k, x in self.c.items()}, K, N)

    def _coerce(self, other) -> "VSeries":
        if isinstance(other, VSeries):
            return other
        return VSeries.const(other, self.K, self.N)

    def __neg__(self):
        return VSeries._raw({k: -x for k, x in self.c.items()}, self.K, self.N)

    def __add__(self, other):
        other = self._coerce(other)
        K, N = min(self.K, other.K), min(self.N, other.N)
        out = {k: x.truncate(N) for k, x in self.c.items() if k <= K}
        for k, x in other.c.items():
            if k > K:
                continue
            out[k] = out[k] + x if k in out else x.truncate(N)
        return VSeries._raw(out, K, N)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, TPoly)):
            return VSeries._raw({k: x * other for k, x in self.c.items()}, self.K, self.N)
        if isinstance(other, WSeries):
            N = min(self.N, other.N)
            return VSeries._raw({k: x * other for k, x in self.c.items()}, self.K, N)
        if not isinstance(other, VSeries):
            return NotImplemented
        K, N = min(self.K, other.K), min(self.N, other.N)
        out: dict = {}
        for i, x in self.c.items():
            for j, y in other.c.items():
                if i + j > K:
                    continue
                p = x * y
                out[i + j] = out[i + j] + p if i + j in out else p
        for k in out:
            out[k] = out[k].truncate(N)
        return VSeries._raw(out, K, N)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, VSeries):
            return divide(self, other)
        other = _q(other)
        return VSeries._raw({k: x / other for k, x in self.c.items()}, self.K, self.N)

    def __pow__(self, n: int):
        out = VSeries.const(1, self.K, self.N)
        for _ in range(n):
            out = out * self
        return out

    def shift(self, m: int) -> "VSeries":
        """Multiply by v**m (exact), raising the known order by m."""
        return VSeries._raw({k + m: x for k, x in self.c.items()}, self.K + m, self.N)

    def mul_w(self, x: WSeries) -> "VSeries":
        return self * x

    def map(self, fn) -> "VSeries":
        items = {k: fn(x) for k, x in self.c.items()}
        N = min((x.N for x in items.values()), default=self.N)
        return VSeries._raw(items, self.K, N)

    def inverse(self) -> "VSeries":
        b0 = self.c.get(0)
        if b0 is None:
            raise NotAUnitError("leading term not a unit")
        inv0 = b0.inverse()
        K, N = self.K, self.N
        out = {0: inv0}
        for n in range(1, K + 1):
            acc = WSeries.zero(N)
            for j, bj in self.c.items():
                if 1 <= j <= n and (n - j) in out:
                    acc = acc + bj * out[n - j]
            if acc:
                out[n] = -(acc * inv0)
        return VSeries._raw(out, K, N)

    @property
    def t_degrees(self) -> dict:
        return {k: x.t_degree for k, x in self.c.items()}


def mul(a, b):
    """Truncated Cauchy product of two series of the same kind."""
    if type(a) is not type(b):
        raise TypeError("mul expects two series of the same kind")
    return a * b


def divide(a: VSeries, b: VSeries) -> VSeries:
    """a / b for a unit b (v^0 coefficient with nonzero constant leading term)."""
    return a * b.inverse()


def derive(a, variable: str):
    """Formal partial derivative in ``t`` or ``w`` of a WSeries or VSeries."""
    if variable not in ("t", "w"):
        raise ValueError(f"unknown variable {variable!r}")
    if isinstance(a, WSeries):
        return a.deriv_t() if variable == "t" else a.deriv_w()
    if isinstance(a, VSeries):
        if variable == "t":
            return a.map(WSeries.deriv_t)
        return VSeries._raw({k: x.deriv_w() for k, x in a.c.items()}, a.K, max(a.N - 1, 0))
    raise TypeError(type(a))


def apply_L(a: VSeries) -> VSeries:
    """Apply L = d/dt + (2/w - 6) d/dv + (12/v)(w - 1/4) d/dw.

    The 1/v in the last term requires the v^0 coefficient of ``a`` to be
    independent of w.  One order in v is lost (the v^{K+1} coefficient of ``a``
    would be needed for the v^K coefficient of the result).
    """
    a0 = a.c.get(0)
    if a0 is not None and not a0.is_w_independent():
        raise UncancelledPoleError("1/v pole not cancelled")
    N = a.N
    A = inv_w(N) * 2 - 6
    K = a.K - 1
    out = {}
    for m in range(0, K + 1):
        term = WSeries.zero(N)
        am = a.c.get(m)
        if am is not None:
            term = term + am.deriv_t()
        an = a.c.get(m + 1)
        if an is not None:
            term = term + A * an * (m + 1) + an.euler_w() * 12
        if term:
            out[m] = term
    return VSeries._raw(out, max(K, 0), N)
