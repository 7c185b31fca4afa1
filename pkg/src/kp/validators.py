"""Independent consistency machinery for the computed correlators.

Nothing here feeds back into the computation: the string/dilaton recursions,
the closed-limit constants, the finite-size Wronskian series and the shipped
reference tables each pin the same numbers through a different formula, so a
bug upstream surfaces as a mismatch somewhere below.

T-correlators are the derivatives of log tau with respect to the unscaled
times T_k; they differ from the open intersection numbers by the per-leg
factor (-1)^k k!! 2^(-k/3) (chain rule through the time rescaling), with the
2^(1/3) powers folding exactly whenever the value is nonzero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from itertools import combinations_with_replacement
from typing import Dict, List, Optional, Sequence, Tuple

from .asymptotics import _c_shifted
from .correlators import (
    Correlator,
    TwoCubeScaled,
    dimension_ok,
    extract_stable,
    one_point,
    prefactor,
)
from .errors import CancellationFailure, FixtureMissing, NotComputed
from .exactmath import POLY_ONE, POLY_ZERO, PolyN, Rat
from .puiseux import (
    MultiSeries,
    PuiseuxSeries,
    geom_inverse_diff,
    series_log,
)

POLY_N = PolyN.variable()


@dataclass(frozen=True)
class TCorrelator:
    """Sorted T-indices k_i = d_i + 1 and the exact derivative of log tau."""

    ks: Tuple[int, ...]
    value: PolyN


@lru_cache(maxsize=None)
def _t_correlator_cached(ks: Tuple[int, ...]) -> TCorrelator:
    corr = one_point(ks[0] // 3) if len(ks) == 1 else extract_stable(
        [k - 1 for k in ks]
    )
    rat = Rat(1)
    for k in ks:
        rat *= prefactor(k - 1).rational_part.c[0]
    value = TwoCubeScaled(corr.value * rat, -sum(ks)).fold()
    return TCorrelator(ks, value)


def t_correlator(ks: Sequence[int], dmax: Optional[int] = None) -> TCorrelator:
    """d^r log tau / dT_{k_1}..dT_{k_r} at T=0, exact in N."""
    ks = tuple(sorted(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ValueError("T-indices must be positive")
    if dmax is not None and max(ks) - 1 > dmax:
        raise NotComputed(f"index {max(ks) - 1} beyond requested window {dmax}")
    if not dimension_ok([k - 1 for k in ks]):
        return TCorrelator(ks, POLY_ZERO)
    return _t_correlator_cached(ks)


def _tc(ks: Sequence[int]) -> PolyN:
    return t_correlator(sorted(ks)).value


def check_string(ms: Sequence[int], dmax: Optional[int] = None) -> bool:
    """String identity differentiated by T_{m_1}..T_{m_r} at T=0.

    sum_j (m_j/2) TCorr(ms with one m_j -> m_j-2, m_j >= 3)
      + TCorr(ms + [1]) + [1/2 if ms == [1,1]] + [N if ms == [2]]  =  0
    """
    ms = sorted(int(m) for m in ms)
    if any(m < 1 for m in ms):
        raise ValueError("T-indices must be positive")
    total = _tc(ms + [1])
    for j, m in enumerate(ms):
        if m >= 3:
            rest = ms[:j] + ms[j + 1 :] + [m - 2]
            total = total + _tc(rest) * Rat(m, 2)
    if ms == [1, 1]:
        total = total + PolyN.const(Rat(1, 2))
    if ms == [2]:
        total = total + POLY_N
    return not total


def check_dilaton(ms: Sequence[int], dmax: Optional[int] = None) -> bool:
    """Dilaton identity differentiated by T_{m_1}..T_{m_r} at T=0.

    (sum_j m_j/2) TCorr(ms) + TCorr(ms + [3]) + [1/16 + 3N^2/4 if r == 0] = 0
    """
    ms = sorted(int(m) for m in ms)
    if any(m < 1 for m in ms):
        raise ValueError("T-indices must be positive")
    total = _tc(ms + [3])
    if ms:
        total = total + _tc(ms) * Rat(sum(ms), 2)
    else:
        total = total + PolyN((Rat(1, 16), 0, Rat(3, 4)))
    return not total


def check_closed_limit(hmax: int) -> bool:
    """Constant terms of one-point correlators against the closed-limit law.

    At N=0 only closed surfaces remain: <tau_{3h-2}> = 1/(24^h h!) for the odd
    doubled genus g = 2h-1 (d = 6h-4), and the even-g values have no constant
    term at all.
    """
    if hmax < 1:
        raise ValueError("hmax >= 1")
    for h in range(1, hmax + 1):
        odd = one_point(2 * h - 1).value
        if odd.eval(0) != Rat(1, 24**h * math.factorial(h)):
            return False
        even = one_point(2 * h).value
        if even.eval(0) != 0:
            return False
    return True


# ---------------------------------------------------------------------------
# Wronskian oracle
# ---------------------------------------------------------------------------


def _f_minus_z(shift: int, order: int) -> Dict[int, PolyN]:
    """F_-(y^2; N+shift) as exponent->PolyN terms in z = 1/y (powers z^(3j))."""
    out = {0: POLY_ONE}
    for j in range(1, order // 3 + 1):
        c = _c_shifted(j, 1, shift)
        if j % 2:
            c = -c
        if c:
            out[3 * j] = c
    return out


def wronskian_logZ(n: int, order: int):
    """log Z_n as an exact truncated series in z_k = 1/y_k (n <= 2).

    All exponential and power prefactors of the Wronskian representation
    cancel against the asymptotics of f, leaving for n=1 exactly
    log F_-(y^2; N) and for n=2

        log [ (z_1 F1(N) F2(N-1) - z_2 F2(N) F1(N-1)) / (z_1 - z_2) ],

    expanded in the ordered region; the ratio must be a unit series (the
    Vandermonde zero cancels the Wronskian zero) or CancellationFailure is
    raised.  The overall sign is normalized by Z_n -> 1 at infinity.
    """
    if order < 1:
        raise ValueError("order >= 1")
    if n == 1:
        series = PuiseuxSeries(_f_minus_z(0, order), order)
        return series_log(series)
    if n != 2:
        raise ValueError("wronskian_logZ supports n = 1 or 2")

    # geometric cap: target monomials with z_2-exponent >= -margin receive
    # complete m-sums once cap >= order + margin, so cancellation is verified
    # on a zone of known-complete coefficients
    margin = 6
    cap = order + margin
    lo = (0, -1 - cap)
    hi = (order + 1, order + 1)
    f1n = _embed2(_f_minus_z(0, order), 0, lo, hi)
    f1m = _embed2(_f_minus_z(-1, order), 0, lo, hi)
    f2n = _embed2(_f_minus_z(0, order), 1, lo, hi)
    f2m = _embed2(_f_minus_z(-1, order), 1, lo, hi)
    # numerator scaled by 1/(z_1 z_2): z_2^(-1) F1(N) F2(N-1) - z_1^(-1) ...
    lo_num = (-1, -1)
    term1 = f1n.mul(f2m, lo=lo_num, hi=hi).mul(
        MultiSeries(2, {(0, -1): POLY_ONE}, (0, -1), (0, 0)), lo=lo_num, hi=hi
    )
    term2 = f2n.mul(f1m, lo=lo_num, hi=hi).mul(
        MultiSeries(2, {(-1, 0): POLY_ONE}, (-1, 0), (0, 0)), lo=lo_num, hi=hi
    )
    num = term1 - term2
    # z_1 z_2 / (z_1 - z_2), expanded for small z_1/z_2
    vander = geom_inverse_diff(2, 1, 1, cap, nvars=2, lo=lo, hi=hi, half_integer=True)
    ratio = num.mul(
        vander,
        lo=(-1 - cap, -1 - cap),
        hi=hi,
        prune_lo=(-margin, -margin),
        total_hi=order,
    )
    bad = [e for e in ratio.terms if min(e) < 0]
    if bad or ratio.terms.get((0, 0)) != POLY_ONE:
        raise CancellationFailure(
            f"Wronskian/Vandermonde ratio is not a unit series: {sorted(bad)[:3]}"
        )
    window_lo, window_hi = (0, 0), (order, order)
    ratio = ratio.restrict(window_lo, window_hi)
    return _mlog(ratio, order)


def _embed2(terms: Dict[int, PolyN], slot: int, lo, hi) -> MultiSeries:
    out = {}
    for e, c in terms.items():
        key = (e, 0) if slot == 0 else (0, e)
        out[key] = c
    return MultiSeries(2, out, lo, hi)


def _mlog(ms: MultiSeries, total: int) -> MultiSeries:
    """log of a unit MultiSeries, truncated at total degree ``total``."""
    u = MultiSeries(
        ms.n,
        {e: c for e, c in ms.terms.items() if any(e)},
        ms.lo,
        ms.hi,
    )
    out = MultiSeries(ms.n, {}, ms.lo, ms.hi)
    power = None
    sign = 1
    for m in range(1, total + 1):
        power = u if power is None else power.mul(u, total_hi=total)
        if not power.terms:
            break
        out = out + power.scale(Rat(sign, m))
        sign = -sign
    return out


def _partitions_leq(total: int):
    """All multisets of positive integers with sum <= total."""
    out = [()]
    def rec(rem, minpart, acc):
        for k in range(minpart, rem + 1):
            out.append(tuple(acc + [k]))
            rec(rem - k, k, acc + [k])
    rec(total, 1, [])
    return out


def check_wronskian_vs_correlators(n: int, degree: int, jobs: int = 1) -> bool:
    """Match wronskian_logZ against the correlator reconstruction of log Z.

    log Z = sum over multisets mu of TCorr(mu) prod_k T_k^{mu_k} / mu_k!  with
    T_k = (z_1^k + ... + z_n^k)/k substituted and expanded to ``degree``.
    """
    lhs = wronskian_logZ(n, degree)
    mus = [mu for mu in _partitions_leq(degree) if mu and sum(mu) % 3 == 0]
    if n == 1:
        rhs: Dict[int, PolyN] = {}
        for mu in mus:
            tval = _tc(list(mu))
            if not tval:
                continue
            w = Rat(1)
            for k in set(mu):
                c = mu.count(k)
                w /= Rat(k) ** c * math.factorial(c)
            d = sum(mu)
            rhs[d] = rhs.get(d, POLY_ZERO) + tval * w
        for e in range(1, degree + 1):
            if lhs.coeff(e) != rhs.get(e, POLY_ZERO):
                return False
        return True
    if n != 2:
        raise ValueError("n must dwell in {1, 2}")
    lo, hi = (0, 0), (degree, degree)
    rhs2 = MultiSeries(2, {}, lo, hi)
    for mu in mus:
        tval = _tc(list(mu))
        if not tval:
            continue
        w = Rat(1)
        acc = MultiSeries(2, {(0, 0): POLY_ONE}, lo, hi)
        for k in set(mu):
            c = mu.count(k)
            w /= Rat(k) ** c * math.factorial(c)
            # (z_1^k + z_2^k)^c expanded binomially
            terms = {}
            for j in range(c + 1):
                e = (k * j, k * (c - j))
                if e[0] <= degree and e[1] <= degree:
                    terms[e] = PolyN.const(math.comb(c, j))
            acc = acc.mul(
                MultiSeries(2, terms, lo, hi), lo=lo, hi=hi, total_hi=degree
            )
        rhs2 = rhs2 + acc.scale(tval * w)
    for e1 in range(degree + 1):
        for e2 in range(degree + 1 - e1):
            if lhs.terms.get((e1, e2), POLY_ZERO) != rhs2.terms.get(
                (e1, e2), POLY_ZERO
            ):
                return False
    return True


# ---------------------------------------------------------------------------
# reference-table regression
# ---------------------------------------------------------------------------


@dataclass
class TableReport:
    """Per-tuple regression outcome for one n-point reference table."""

    n: int
    compared: int = 0
    mismatches: List[Tuple[int, ...]] = field(default_factory=list)
    zero_checked: int = 0
    zero_failures: List[Tuple[int, ...]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches and not self.zero_failures


_TABLE_RANGES = {2: 30, 3: 10, 4: 7, 5: 6, 6: 4}


def load_reference_tables() -> dict:
    try:
        blob = (
            resources.files("kp") / "data" / "reference_tables.json"
        ).read_text()
    except (FileNotFoundError, ModuleNotFoundError) as exc:
        raise FixtureMissing("reference_tables.json is not installed") from exc
    doc = json.loads(blob)
    if doc.get("schema") != "kp-reference-tables/v1":
        raise FixtureMissing(f"unexpected fixture schema {doc.get('schema')!r}")
    return doc


def _fixture_poly(coeffs) -> PolyN:
    return PolyN([Rat(int(num), int(den)) for num, den in coeffs])


def regression_tables(which: int, jobs: int = 1) -> TableReport:
    """Compare computed values against the shipped n-point reference table.

    Listed entries must match exactly; dimension-allowed tuples inside the
    table range that the (nonzero-only) table omits must compute to zero.
    """
    doc = load_reference_tables()
    try:
        rows = doc["tables"][str(which)]
    except KeyError as exc:
        raise FixtureMissing(f"no reference table for n={which}") from exc
    report = TableReport(n=which)
    listed = {}
    for ent in rows:
        listed[tuple(ent["d"])] = _fixture_poly(ent["coeffs"])
    if which == 1:
        for d, expect in sorted(listed.items()):
            report.compared += 1
            if one_point((d[0] + 1) // 3).value != expect:
                report.mismatches.append(d)
        return report
    dmax = _TABLE_RANGES[which]
    for d, expect in sorted(listed.items()):
        report.compared += 1
        if extract_stable(d, dmax=dmax, jobs=jobs).value != expect:
            report.mismatches.append(d)
    for tup in combinations_with_replacement(range(dmax + 1), which):
        if not dimension_ok(tup) or tup in listed:
            continue
        report.zero_checked += 1
        if extract_stable(tup, dmax=dmax, jobs=jobs).value:
            report.zero_failures.append(tup)
    return report
