"""Concrete series data of the model: C_j(N), F±, P-polynomials, A(lambda).

Two independent routes produce the P polynomials:

* the product route: P^k_{a,b}(N) is the x^(3k) coefficient of
  F_-(lambda; N+a) * F_+(lambda; -N-b), which has no special cases and is
  treated as normative;
* the hypergeometric route: coefficient extraction from
  e^(Z/3) * 2F2(...; -Z/4) generating functions, including the residue
  interpretation for the three resonant (a, b) pairs.

Their agreement for all nine (a, b) pairs is one of the acceptance gates.
The 3x3 matrix A(lambda) built from the P-series is a scaled rank-one
projector: Tr A = 2 lambda^(1/2), A^2 = 2 lambda^(1/2) A, det A = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List

from .errors import ResonanceUnhandled
from .exactmath import (
    POLY_ONE,
    POLY_ZERO,
    PolyN,
    Rat,
    binom_negN,
    gamma_half_ratio,
    pochhammer_rat,
)
from .puiseux import PuiseuxSeries

# entry layout of A(lambda): a depends on the column, b on the row, and the
# x-exponent of the k-th term of entry (r, c) is 3k + a(c) - b(r)
_COL_A = {1: 1, 2: -1, 3: 0}
_ROW_B = {1: -1, 2: 0, 3: 1}


@dataclass(frozen=True)
class PPolyKey:
    a: int
    b: int
    k: int

    def __post_init__(self):
        if self.a not in (-1, 0, 1) or self.b not in (-1, 0, 1):
            raise ValueError("a, b must lie in {-1, 0, 1}")
        if self.k < 0:
            raise ValueError("k must be nonnegative")


@lru_cache(maxsize=None)
def c_coeff(j: int) -> PolyN:
    """Asymptotic coefficient C_j(N), an exact polynomial of degree 2j.

    C_j(N) = sum_{b=0}^{2j} (-1)^b / (3^b b!) * binom(-N, 2j-b)
             * Gamma(1/2 + j + b) / sqrt(pi)
    """
    if j < 0:
        raise ValueError("c_coeff needs j >= 0")
    out = POLY_ZERO
    fact_b = 1
    for b in range(2 * j + 1):
        if b:
            fact_b *= b
        scalar = Rat((-1) ** b, 3**b * fact_b) * gamma_half_ratio(j + b)
        out = out + binom_negN(2 * j - b) * scalar
    return out


@lru_cache(maxsize=None)
def _c_shifted(j: int, scale: int, shift: int) -> PolyN:
    """C_j evaluated at the affine argument scale*N + shift."""
    return c_coeff(j).subs_affine(scale, shift)


def f_series(
    sign: int, order: int, *, shift: int = 0, negate_n: bool = False
) -> PuiseuxSeries:
    """F_sign(lambda; ell) as a series in x = lambda^(-1/2), valid to ``order``.

    The argument ell is N+shift, or -N-shift when ``negate_n`` is set; the
    minus branch carries the alternating signs (-1)^j on C_j.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    scale, off = (-1, -shift) if negate_n else (1, shift)
    terms = {0: POLY_ONE}
    for j in range(1, order // 3 + 1):
        c = _c_shifted(j, scale, off)
        if sign < 0 and j % 2:
            c = -c
        if c:
            terms[3 * j] = c
    return PuiseuxSeries(terms, order)


def check_f_recurrence(order: int) -> bool:
    """Termwise check of F±(N-2) - F±(N) ± N x^3 F±(N+1) = 0 up to ``order``."""
    if order < 3:
        raise ValueError("order must be at least 3")
    n_poly = PolyN.variable()
    for sign in (-1, 1):
        lhs = (
            f_series(sign, order, shift=-2)
            - f_series(sign, order)
            + (f_series(sign, order, shift=1) * n_poly * sign).shift(3)
        )
        if not lhs.truncate(order).is_zero():
            return False
    return True


@lru_cache(maxsize=None)
def p_poly_product(key: PPolyKey) -> PolyN:
    """P^k_{a,b}(N) as the x^(3k) coefficient of F_-(N+a) F_+(-N-b)."""
    out = POLY_ZERO
    for i in range(key.k + 1):
        left = _c_shifted(i, 1, key.a)
        if i % 2:
            left = -left
        right = _c_shifted(key.k - i, -1, -key.b)
        out = out + left * right
    return out


def _exp_z_third(m: int) -> Rat:
    """Coefficient of Z^m in e^(Z/3)."""
    fact = 1
    for i in range(2, m + 1):
        fact *= i
    return Rat(1, 3**m * fact)


def _poch_poly(c0: Rat, sign: int, n: int) -> PolyN:
    """Rising factorial (c0 + sign*N)_n as a PolyN."""
    out = POLY_ONE
    for i in range(n):
        out = out * PolyN((c0 + i, Rat(sign)))
    return out


@lru_cache(maxsize=None)
def p_poly_hypergeom(key: PPolyKey) -> PolyN:
    """P^k_{a,b}(N) from the hypergeometric generating functions.

    Even k = 2m: Gamma-ratio (s)_{3m} with s = (a-b+1)/2 times the Z^m
    coefficient of e^(Z/3) 2F2((1-a-b)/2 - N, (1+a+b)/2 + N; 1/2, s; -Z/4).
    Odd k = 2m+1: (t)_{3m+1} with t = (a-b+2)/2 times the Z^m coefficient of
    -(2N+a+b)/2 * e^(Z/3) 2F2((2-a-b)/2 - N, (2+a+b)/2 + N; 3/2, t; -Z/4).

    When s (even case) or t (odd case) vanishes both sides of the identity
    have simple poles; equating residues replaces 1/(s)_n by 1/((n-1)! n>=1)
    and the Gamma ratio by Gamma(3m) (resp. Gamma(3m+1)).
    """
    a, b, k = key.a, key.b, key.k
    m, odd = divmod(k, 2)
    if odd:
        lower2 = Rat(a - b + 2, 2)
        alpha0, beta0 = Rat(2 - a - b, 2), Rat(2 + a + b, 2)
        gamma_lower = Rat(3, 2)
    else:
        lower2 = Rat(a - b + 1, 2)
        alpha0, beta0 = Rat(1 - a - b, 2), Rat(1 + a + b, 2)
        gamma_lower = Rat(1, 2)

    resonant = lower2 == 0
    if resonant and (a, b) not in ((-1, 0), (0, 1), (-1, 1)):
        raise ResonanceUnhandled(f"unexpected resonant pair {(a, b)}")

    # Z^m coefficient of e^(Z/3) * (2F2 series in Z), exact in N
    acc = POLY_ZERO
    for n in range(m + 1):
        num = _poch_poly(alpha0, -1, n) * _poch_poly(beta0, 1, n)
        den = pochhammer_rat(gamma_lower, n) * _factorial(n)
        if resonant:
            if n == 0:
                continue  # the residue identity only sees the n >= 1 pole terms
            term_scalar = Rat(1, _factorial(n - 1))
        else:
            term_scalar = 1 / pochhammer_rat(lower2, n)
        z_rest = _exp_z_third(m - n)
        acc = acc + num * (Rat(-1, 4) ** n / den * term_scalar * z_rest)

    if resonant and not odd and m == 0:
        return POLY_ONE  # the residue identity does not constrain P^0; it is 1

    if resonant:
        ratio = Rat(_factorial(3 * m - 1) if not odd else _factorial(3 * m))
    else:
        ratio = pochhammer_rat(lower2, 3 * m + (1 if odd else 0))

    out = acc * ratio
    if odd:
        out = out * PolyN((Rat(-(a + b), 2), Rat(-1)))  # prefactor -(2N+a+b)/2
    return out


def _factorial(n: int) -> int:
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


class MatrixSeries:
    """3x3 matrix of PuiseuxSeries sharing one validity order."""

    __slots__ = ("entries", "valid")

    def __init__(self, entries: List[List[PuiseuxSeries]]):
        self.entries = entries
        self.valid = min(s.valid for row in entries for s in row)

    def __getitem__(self, rc):
        r, c = rc
        return self.entries[r - 1][c - 1]

    def matmul(self, other: "MatrixSeries") -> "MatrixSeries":
        out = []
        for r in range(3):
            row = []
            for c in range(3):
                acc = None
                for s in range(3):
                    prod = self.entries[r][s] * other.entries[s][c]
                    acc = prod if acc is None else acc + prod
                row.append(acc)
            out.append(row)
        return MatrixSeries(out)

    def scale(self, series: PuiseuxSeries) -> "MatrixSeries":
        return MatrixSeries([[e * series for e in row] for row in self.entries])

    def __sub__(self, other: "MatrixSeries") -> "MatrixSeries":
        return MatrixSeries(
            [
                [a - b for a, b in zip(ra, rb)]
                for ra, rb in zip(self.entries, other.entries)
            ]
        )

    def trace(self) -> PuiseuxSeries:
        e = self.entries
        return e[0][0] + e[1][1] + e[2][2]

    def det(self) -> PuiseuxSeries:
        e = self.entries
        out = None
        for c, sign in ((0, 1), (1, -1), (2, 1)):
            c1, c2 = [x for x in range(3) if x != c]
            minor = e[1][c1] * e[2][c2] - e[1][c2] * e[2][c1]
            term = e[0][c] * minor
            term = term if sign > 0 else -term
            out = term if out is None else out + term
        return out

    def is_zero(self) -> bool:
        return all(s.truncate(self.valid).is_zero() for row in self.entries for s in row)


def a_matrix_entry_params(r: int, c: int):
    """(a, b, exponent offset, has N prefactor) for entry (r, c), 1-based."""
    a, b = _COL_A[c], _ROW_B[r]
    return a, b, a - b, c == 1


def a_matrix(order: int) -> MatrixSeries:
    """A(lambda) with every entry truncated to validity ``order`` in x."""
    if order < 2:
        raise ValueError("order must be at least 2")
    n_poly = PolyN.variable()
    rows = []
    for r in (1, 2, 3):
        row = []
        for c in (1, 2, 3):
            a, b, off, with_n = a_matrix_entry_params(r, c)
            terms = {}
            k = 0
            while 3 * k + off <= order:
                p = p_poly_product(PPolyKey(a, b, k))
                if with_n:
                    p = p * n_poly
                if p:
                    terms[3 * k + off] = p
                k += 1
            row.append(PuiseuxSeries(terms, order))
        rows.append(row)
    return MatrixSeries(rows)
