"""Exact rational arithmetic and the polynomial ring Q[N].

Everything downstream (series coefficients, correlators, table entries) lives
over arbitrary-precision rationals; N is kept as a symbolic indeterminate so
that computed correlators are honest polynomials in N rather than a stack of
specializations.  Rationals are gmpy2.mpq when available (much faster on the
polynomial-multiplication hot path), fractions.Fraction otherwise; both keep
values reduced with a positive denominator.
"""

from __future__ import annotations

from typing import Iterable, Union

try:
    from gmpy2 import mpq as Rat
except ImportError:  # pragma: no cover
    from fractions import Fraction as Rat

RatLike = Union[int, "Rat"]

_Q0 = Rat(0)
_Q1 = Rat(1)


def double_factorial(k: int) -> int:
    """k!! = k (k-2) (k-4) ... down to 1 or 2; 0!! = (-1)!! = 1."""
    if k < 0:
        raise ValueError("double_factorial needs k >= 0")
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def gamma_half_ratio(m: int) -> Rat:
    """Gamma(1/2 + m) / Gamma(1/2) = (2m-1)!! / 2^m, exactly."""
    if m < 0:
        raise ValueError("gamma_half_ratio needs m >= 0")
    return Rat(double_factorial(2 * m - 1) if m else 1, 2**m)


def pochhammer_rat(s: Rat, n: int) -> Rat:
    """Rising factorial (s)_n = s (s+1) ... (s+n-1) for rational s."""
    out = _Q1
    for i in range(n):
        out *= s + i
    return out


class PolyN:
    """Dense polynomial in the indeterminate N over exact rationals.

    Coefficients are stored ascending in degree with no trailing zeros; the
    zero polynomial is the empty tuple.  Instances are immutable and hashable,
    so they can key memo tables and be shared freely between workers.
    """

    __slots__ = ("c",)

    def __init__(self, coeffs: Iterable[RatLike] = ()):
        c = [Rat(x) for x in coeffs]
        while c and not c[-1]:
            c.pop()
        self.c = tuple(c)

    # -- constructors ------------------------------------------------------

    @classmethod
    def _raw(cls, coeffs: tuple) -> "PolyN":
        """Trusted constructor: coefficients already exact, no trailing zeros."""
        obj = object.__new__(cls)
        obj.c = coeffs
        return obj

    @classmethod
    def const(cls, v: RatLike) -> "PolyN":
        return cls((Rat(v),))

    @classmethod
    def variable(cls) -> "PolyN":
        """The polynomial N itself."""
        return cls((_Q0, _Q1))

    # -- structure ---------------------------------------------------------

    @property
    def degree(self) -> int:
        return len(self.c) - 1

    def __bool__(self) -> bool:
        return bool(self.c)

    def __eq__(self, other) -> bool:
        if isinstance(other, PolyN):
            return self.c == other.c
        if isinstance(other, (int, type(_Q1))):
            return self.c == PolyN.const(other).c
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.c)

    # -- arithmetic --------------------------------------------------------

    def __neg__(self) -> "PolyN":
        return PolyN._raw(tuple(-a for a in self.c))

    def __add__(self, other) -> "PolyN":
        if not isinstance(other, PolyN):
            other = _coerce(other)
        a, b = self.c, other.c
        if len(a) < len(b):
            a, b = b, a
        if not b:
            return self if a is self.c else other
        out = list(a)
        for i, v in enumerate(b):
            out[i] += v
        while out and not out[-1]:
            out.pop()
        return PolyN._raw(tuple(out))

    __radd__ = __add__

    def __sub__(self, other) -> "PolyN":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "PolyN":
        return _coerce(other) + (-self)

    def __mul__(self, other) -> "PolyN":
        if isinstance(other, (int, type(_Q1))):
            q = Rat(other)
            if not q:
                return _ZERO
            return PolyN._raw(tuple(a * q for a in self.c))
        if not isinstance(other, PolyN):
            return NotImplemented
        a, b = self.c, other.c
        if not a or not b:
            return _ZERO
        out = [_Q0] * (len(a) + len(b) - 1)
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    out[i + j] += ai * bj
        while out and not out[-1]:
            out.pop()
        return PolyN._raw(tuple(out))

    __rmul__ = __mul__

    def __truediv__(self, q: RatLike) -> "PolyN":
        q = Rat(q)
        return PolyN(a / q for a in self.c)

    def __pow__(self, n: int) -> "PolyN":
        if n < 0:
            raise ValueError("negative power of a polynomial")
        out, base = _ONE, self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- evaluation and substitution ----------------------------------------

    def eval(self, v: RatLike) -> Rat:
        """Horner evaluation at a rational point, exact."""
        v = Rat(v)
        acc = _Q0
        for a in reversed(self.c):
            acc = acc * v + a
        return acc

    def subs_affine(self, scale: int, shift: int) -> "PolyN":
        """p(N) -> p(scale*N + shift); enough for the N+a / -N-b substitutions."""
        arg = PolyN((Rat(shift), Rat(scale)))
        acc = _ZERO
        for a in reversed(self.c):
            acc = acc * arg + PolyN.const(a)
        return acc

    # -- rendering ----------------------------------------------------------

    def __repr__(self) -> str:
        return f"PolyN({self.human()!r})"

    def human(self) -> str:
        """Ascending-degree display form, e.g. '1/24 + 1/2*N^2'."""
        if not self.c:
            return "0"
        parts = []
        for i, a in enumerate(self.c):
            if not a:
                continue
            mono = "" if i == 0 else ("N" if i == 1 else f"N^{i}")
            mag = str(a if a > 0 else -a)
            body = mag if not mono else (mono if mag == "1" else f"{mag}*{mono}")
            if not parts:
                parts.append(body if a > 0 else f"-{body}")
            else:
                parts.append(f"+ {body}" if a > 0 else f"- {body}")
        return " ".join(parts)


def _coerce(v) -> PolyN:
    if isinstance(v, PolyN):
        return v
    if isinstance(v, (int, type(_Q1))):
        return PolyN.const(v)
    raise TypeError(f"cannot coerce {type(v)!r} into PolyN")


_ZERO = PolyN()
_ONE = PolyN.const(1)

POLY_ZERO = _ZERO
POLY_ONE = _ONE
POLY_N = PolyN.variable()


def binom_negN(k: int) -> PolyN:
    """Falling-factorial binomial (-N choose k) as a polynomial in N."""
    if k < 0:
        raise ValueError("binom_negN needs k >= 0")
    out = _ONE
    for i in range(k):
        out = out * PolyN((Rat(-i), Rat(-1)))  # factor (-N - i)
    return out / Rat(_factorial(k))


def _factorial(k: int) -> int:
    out = 1
    for i in range(2, k + 1):
        out *= i
    return out


def poly_eval(p: PolyN, v: RatLike) -> Rat:
    """Exact evaluation p(v); module-level spelling of PolyN.eval."""
    return p.eval(v)
