"""Truncated Laurent series over PolyN, single- and multi-variable.

Convention: the single-variable series live in x = lambda^(-1/2), so a power
lambda^s is the monomial x^(-2s) and every exponent in sight is an integer.
A series knows the order up to which its coefficients are trustworthy
(``valid``): coefficients beyond it are unknown, not zero, and every operation
computes the tightest honest validity of its result.

The multivariate container keeps per-variable exponent windows instead of a
validity order.  High-side clipping is safe for the intended products (all
remaining factors can only raise exponents by a known bounded amount, which
callers account for); dropping a term below the low window would be silent
data loss, so that is an error.
"""

from __future__ import annotations

from typing import Dict, Iterable, Tuple

import numpy as np

from .errors import NonUnitLeadingTerm, NotComputed, WindowUnderflow
from .exactmath import POLY_ONE, POLY_ZERO, PolyN, Rat

ExpTuple = Tuple[int, ...]


class PuiseuxSeries:
    """Single-variable truncated Laurent series with PolyN coefficients."""

    __slots__ = ("terms", "valid")

    def __init__(self, terms: Dict[int, PolyN], valid: int):
        self.terms = {e: c for e, c in terms.items() if c}
        self.valid = valid
        if self.terms and max(self.terms) > valid:
            raise ValueError("term beyond declared validity order")

    @classmethod
    def from_const(cls, c, valid: int) -> "PuiseuxSeries":
        p = c if isinstance(c, PolyN) else PolyN.const(c)
        return cls({0: p} if p else {}, valid)

    @classmethod
    def monomial(cls, e: int, c, valid: int) -> "PuiseuxSeries":
        p = c if isinstance(c, PolyN) else PolyN.const(c)
        return cls({e: p} if p else {}, valid)

    # -- structure -----------------------------------------------------------

    @property
    def min_exp(self) -> int:
        """Valuation of the known part; one past validity if that part is 0."""
        return min(self.terms) if self.terms else self.valid + 1

    def coeff(self, e: int) -> PolyN:
        if e > self.valid:
            raise NotComputed(f"coefficient at x^{e} beyond validity {self.valid}")
        return self.terms.get(e, POLY_ZERO)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        if not isinstance(other, PuiseuxSeries):
            return NotImplemented
        lim = min(self.valid, other.valid)
        keys = set(self.terms) | set(other.terms)
        return all(
            self.terms.get(e, POLY_ZERO) == other.terms.get(e, POLY_ZERO)
            for e in keys
            if e <= lim
        )

    def __repr__(self) -> str:
        inner = " + ".join(
            f"({self.terms[e].human()})*x^{e}" for e in sorted(self.terms)
        )
        return f"PuiseuxSeries({inner or '0'}; valid<=x^{self.valid})"

    # -- ring operations -----------------------------------------------------

    def __neg__(self) -> "PuiseuxSeries":
        return PuiseuxSeries({e: -c for e, c in self.terms.items()}, self.valid)

    def __add__(self, other: "PuiseuxSeries") -> "PuiseuxSeries":
        valid = min(self.valid, other.valid)
        out = {e: c for e, c in self.terms.items() if e <= valid}
        for e, c in other.terms.items():
            if e <= valid:
                s = out.get(e, POLY_ZERO) + c
                if s:
                    out[e] = s
                elif e in out:
                    del out[e]
        return PuiseuxSeries(out, valid)

    def __sub__(self, other: "PuiseuxSeries") -> "PuiseuxSeries":
        return self + (-other)

    def __mul__(self, other) -> "PuiseuxSeries":
        if isinstance(other, (PolyN, int, type(Rat(1)))):
            p = other if isinstance(other, PolyN) else PolyN.const(other)
            return PuiseuxSeries(
                {e: c * p for e, c in self.terms.items()}, self.valid
            )
        if not isinstance(other, PuiseuxSeries):
            return NotImplemented
        # product of known parts is trustworthy to min(M1+v2, M2+v1)
        valid = min(self.valid + other.min_exp, other.valid + self.min_exp)
        out: Dict[int, PolyN] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = e1 + e2
                if e > valid:
                    continue
                prod = c1 * c2
                if not prod:
                    continue
                s = out.get(e, POLY_ZERO) + prod
                if s:
                    out[e] = s
                elif e in out:
                    del out[e]
        return PuiseuxSeries(out, valid)

    __rmul__ = __mul__

    def shift(self, k: int) -> "PuiseuxSeries":
        """Multiply by x^k."""
        return PuiseuxSeries({e + k: c for e, c in self.terms.items()}, self.valid + k)

    def truncate(self, order: int) -> "PuiseuxSeries":
        return PuiseuxSeries(
            {e: c for e, c in self.terms.items() if e <= order},
            min(self.valid, order),
        )


def series_add(a: PuiseuxSeries, b: PuiseuxSeries) -> PuiseuxSeries:
    return a + b


def series_mul(a: PuiseuxSeries, b: PuiseuxSeries) -> PuiseuxSeries:
    return a * b


def series_inverse(a: PuiseuxSeries) -> PuiseuxSeries:
    """Invert a unit series (constant term 1, valuation 0) termwise."""
    _require_unit(a)
    valid = a.valid
    inv: Dict[int, PolyN] = {0: POLY_ONE}
    # b_m = -sum_{k=1..m} a_k b_{m-k}
    for m in range(1, valid + 1):
        s = POLY_ZERO
        for k, ak in a.terms.items():
            if 1 <= k <= m:
                bmk = inv.get(m - k)
                if bmk is not None:
                    s = s + ak * bmk
        if s:
            inv[m] = -s
    return PuiseuxSeries(inv, valid)


def series_log(a: PuiseuxSeries) -> PuiseuxSeries:
    """Formal log of a unit series via log(1+u) = sum (-1)^(m+1) u^m / m."""
    _require_unit(a)
    valid = a.valid
    u = PuiseuxSeries({e: c for e, c in a.terms.items() if e != 0}, valid)
    out = PuiseuxSeries({}, valid)
    power = PuiseuxSeries.from_const(POLY_ONE, valid)
    sign = 1
    for m in range(1, valid + 1):
        power = (power * u).truncate(valid)
        if power.is_zero():
            break
        out = out + power * Rat(sign, m)
        sign = -sign
    return out


def series_exp(a: PuiseuxSeries) -> PuiseuxSeries:
    """Formal exp of a series with zero constant term."""
    if 0 in a.terms:
        raise NonUnitLeadingTerm("series_exp needs zero constant term")
    if a.terms and min(a.terms) < 1:
        raise NonUnitLeadingTerm("series_exp needs positive valuation")
    valid = a.valid
    out = PuiseuxSeries.from_const(POLY_ONE, valid)
    power = PuiseuxSeries.from_const(POLY_ONE, valid)
    fact = Rat(1)
    for m in range(1, valid + 1):
        power = (power * a).truncate(valid)
        if power.is_zero():
            break
        fact = fact * m
        out = out + power * (1 / fact)
    return out


def _require_unit(a: PuiseuxSeries) -> None:
    if a.terms.get(0) != POLY_ONE or (a.terms and min(a.terms) < 0):
        raise NonUnitLeadingTerm("series must have constant term 1 and valuation 0")


class MultiSeries:
    """Multivariate truncated Laurent series with per-variable windows.

    ``terms`` maps integer exponent tuples to PolyN coefficients; every stored
    tuple lies inside [lo_i, hi_i] per variable.  ``clipped`` records whether
    any term was dropped on the high side.
    """

    __slots__ = ("n", "terms", "lo", "hi", "clipped")

    def __init__(
        self,
        n: int,
        terms: Dict[ExpTuple, PolyN],
        lo: ExpTuple,
        hi: ExpTuple,
        clipped: bool = False,
    ):
        self.n = n
        self.lo = tuple(lo)
        self.hi = tuple(hi)
        self.terms = {e: c for e, c in terms.items() if c}
        self.clipped = clipped
        for e in self.terms:
            if any(ei < li for ei, li in zip(e, self.lo)):
                raise WindowUnderflow(f"term {e} below window {self.lo}")
            if any(ei > hi_ for ei, hi_ in zip(e, self.hi)):
                raise ValueError(f"term {e} above window {self.hi}")

    @classmethod
    def _raw(cls, n, terms, lo, hi, clipped=False) -> "MultiSeries":
        """Trusted constructor: terms already windowed and nonzero."""
        obj = object.__new__(cls)
        obj.n, obj.terms, obj.lo, obj.hi, obj.clipped = n, terms, lo, hi, clipped
        return obj

    @classmethod
    def one(cls, n: int, lo: ExpTuple, hi: ExpTuple) -> "MultiSeries":
        return cls(n, {(0,) * n: POLY_ONE}, lo, hi)

    @classmethod
    def monomial(cls, n, exps: ExpTuple, c, lo, hi) -> "MultiSeries":
        p = c if isinstance(c, PolyN) else PolyN.const(c)
        return cls(n, {tuple(exps): p}, lo, hi)

    def coeff(self, exps: Iterable[int]) -> PolyN:
        e = tuple(exps)
        if any(ei > hi_ for ei, hi_ in zip(e, self.hi)) or any(
            ei < li for ei, li in zip(e, self.lo)
        ):
            raise NotComputed(f"monomial {e} outside window [{self.lo}, {self.hi}]")
        return self.terms.get(e, POLY_ZERO)

    def __neg__(self) -> "MultiSeries":
        return MultiSeries(
            self.n, {e: -c for e, c in self.terms.items()}, self.lo, self.hi, self.clipped
        )

    def __add__(self, other: "MultiSeries") -> "MultiSeries":
        if self.n != other.n:
            raise ValueError("variable count mismatch")
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        out: Dict[ExpTuple, PolyN] = {}
        for src in (self.terms, other.terms):
            for e, c in src.items():
                if any(ei < li or ei > hi_ for ei, li, hi_ in zip(e, lo, hi)):
                    continue
                s = out.get(e, POLY_ZERO) + c
                if s:
                    out[e] = s
                elif e in out:
                    del out[e]
        return MultiSeries(self.n, out, lo, hi, self.clipped or other.clipped)

    def __sub__(self, other: "MultiSeries") -> "MultiSeries":
        return self + (-other)

    def scale(self, p) -> "MultiSeries":
        p = p if isinstance(p, PolyN) else PolyN.const(p)
        return MultiSeries(
            self.n, {e: c * p for e, c in self.terms.items()}, self.lo, self.hi, self.clipped
        )

    def mul(
        self,
        other: "MultiSeries",
        lo: ExpTuple | None = None,
        hi: ExpTuple | None = None,
        prune_lo: ExpTuple | None = None,
        total_hi: int | None = None,
    ) -> "MultiSeries":
        """Windowed convolution.

        The result window defaults to the intersection of the operand windows;
        callers doing staged products pass explicit windows (widened by the
        minimum future contribution of the factors still to come, so high-side
        clipping never discards a term that could re-enter the window).
        Falling below the low window raises WindowUnderflow.  ``prune_lo``
        additionally drops terms below a caller-proven irrelevance threshold
        (terms whose every completion misses the final window); unlike the
        window itself this is an exact optimization, never silent data loss.
        """
        if self.n != other.n:
            raise ValueError("variable count mismatch")
        lo = tuple(lo) if lo is not None else tuple(
            max(a, b) for a, b in zip(self.lo, other.lo)
        )
        hi = tuple(hi) if hi is not None else tuple(
            min(a, b) for a, b in zip(self.hi, other.hi)
        )
        plo = tuple(prune_lo) if prune_lo is not None else lo
        out: Dict[ExpTuple, PolyN] = {}
        clipped = self.clipped or other.clipped
        if not self.terms or not other.terms:
            return MultiSeries._raw(self.n, out, lo, hi, clipped)

        # vectorized pair filtering: the exponent bookkeeping dominates the
        # dense convolution, the rational arithmetic only runs on survivors
        small, big = self, other
        if len(small.terms) > len(big.terms):
            small, big = big, small
        e1 = np.array(list(small.terms.keys()), dtype=np.int32)
        c1 = list(small.terms.values())
        e2 = np.array(list(big.terms.keys()), dtype=np.int32)
        c2 = list(big.terms.values())
        lo_a = np.array(lo, dtype=np.int32)
        plo_a = np.maximum(lo_a, np.array(plo, dtype=np.int32))
        hi_a = np.array(hi, dtype=np.int32)

        chunk = max(1, 4_000_000 // (len(e2) * self.n + 1))
        for s in range(0, len(e1), chunk):
            sums = e1[s : s + chunk, None, :] + e2[None, :, :]
            ok_hi = (sums <= hi_a).all(-1)
            if total_hi is not None:
                ok_hi &= sums.sum(-1) <= total_hi
            ok_lo = (sums >= plo_a).all(-1)
            ok = ok_hi & ok_lo
            if not ok.all():
                if not ok_hi.all():
                    clipped = True
                under = ~ok_lo & (sums < lo_a).any(-1)
                if under.any():
                    i, j = np.argwhere(under)[0]
                    bad = tuple(sums[i, j].tolist())
                    raise WindowUnderflow(
                        f"product monomial {bad} fell below window {lo}"
                    )
            for i, j in zip(*np.nonzero(ok)):
                prod = c1[s + i] * c2[j]
                if not prod:
                    continue
                e = tuple(sums[i, j].tolist())
                acc = out.get(e)
                val = prod if acc is None else acc + prod
                if val:
                    out[e] = val
                elif e in out:
                    del out[e]
        return MultiSeries._raw(self.n, out, lo, hi, clipped)

    def restrict(self, lo: ExpTuple, hi: ExpTuple) -> "MultiSeries":
        """Narrow the window, discarding outside terms (low side included)."""
        out = {
            e: c
            for e, c in self.terms.items()
            if all(li <= ei <= hi_ for ei, li, hi_ in zip(e, lo, hi))
        }
        return MultiSeries(self.n, out, lo, hi, self.clipped)

    def dump(self) -> str:
        """One 'e1,...,en: poly' line per term, lexicographic; for golden tests."""
        lines = []
        for e in sorted(self.terms):
            lines.append(f"{','.join(str(x) for x in e)}: {self.terms[e].human()}")
        return "\n".join(lines)

    def __repr__(self) -> str:
        return (
            f"MultiSeries(n={self.n}, terms={len(self.terms)}, "
            f"lo={self.lo}, hi={self.hi}, clipped={self.clipped})"
        )


def multi_mul(a: MultiSeries, b: MultiSeries, **kw) -> MultiSeries:
    return a.mul(b, **kw)


def geom_inverse_diff(
    i: int,
    j: int,
    power: int,
    cap: int,
    *,
    nvars: int,
    lo: ExpTuple,
    hi: ExpTuple,
    half_integer: bool = False,
) -> MultiSeries:
    """Ordered-region expansion of 1/(lambda_i - lambda_j)^power as a MultiSeries.

    Variables are 1-based; the expansion region is |lambda_1| > ... > |lambda_n|
    (equivalently |x_1| < ... < |x_n|), so the smaller index always carries the
    positive exponents.  With ``half_integer`` the difference is taken between
    the square roots lambda^(1/2) = x^(-1), i.e. between the plain inverse
    variables; that covers both the n=2 correction term and the Wronskian
    Vandermonde in z = 1/y.
    """
    if i == j:
        raise ValueError("geom_inverse_diff needs distinct variables")
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    a, b = (i, j) if i < j else (j, i)
    # sign: 1/(lambda_i - lambda_j) with i > j is minus the mirrored expansion
    sign = 1 if (i < j or power == 2) else -1
    step = 1 if half_integer else 2
    base = power * step  # leading exponent on the small-index variable
    terms: Dict[ExpTuple, PolyN] = {}
    for m in range(cap + 1):
        e = [0] * nvars
        e[a - 1] = step * m + base
        e[b - 1] = -step * m
        coeff = (m + 1) if power == 2 else 1
        terms[tuple(e)] = PolyN.const(sign * coeff)
    ms = MultiSeries(nvars, {}, lo, hi)
    for e, c in terms.items():
        if all(li <= ei <= hi_ for ei, li, hi_ in zip(e, lo, hi)):
            ms.terms[e] = c
        else:
            ms.clipped = True
    return ms
