"""Open intersection numbers from the closed trace formulas.

The generating function S_n in the ordered region |lambda_1| > ... > |lambda_n|
is assembled as a windowed multivariate Laurent series:

    S_n = - sum over cyclic-reduced permutations of
              Tr[A(x_{i_1}) ... A(x_{i_n})] * prod 1/(lambda_{i_k}-lambda_{i_{k+1}})
          - (n==2 correction) 1/(lambda_1^(1/2) - lambda_2^(1/2))^2,

with every 1/(lambda_a - lambda_b) expanded geometrically in the region and
capped at a caller-controlled order; cap adequacy is established empirically
by recomputing with a doubled cap (stability_check).  The full symmetric-group
sum with weight 1/n collapses to the (n-1)! permutations fixing i_1 = 1
because trace and denominator are cyclic invariant.

A(lambda) is a scaled rank-one projector (that is the content of the
A^2 = 2 lambda^(1/2) A identity): its F-product form factorizes entrywise as
A[r,c](x) = u_r(x) v_c(x).  The trace of a cyclic product therefore collapses
to a product of scalar kernels, one per adjacent pair in the cycle,

    Tr[A(x_{c_1}) ... A(x_{c_n})] = prod_k S(x_{c_k}, x_{c_{k+1}}),
    S(x_p, x_q) = N x_p x_q F-(p;N+1) F+(q;-N+1)
                  + x_p^(-1) F-(p;N-1) F+(q;-N) + x_q^(-1) F-(p;N) F+(q;-N-1),

and each permutation term is a product of n bivariate edge factors
S(c_k, c_{k+1}) / (lambda_{c_k} - lambda_{c_{k+1}}).  Exponent windows are
pruned stage by stage using the exact minimum/maximum contribution the
remaining edges can still make.

A correlator with doubled indices d_1..d_n is then the coefficient of
prod x_i^(d_i+2) divided by the per-leg prefactors (-1)^(d+1) (d+1)!! 2^-(d+1)/3;
the 2^(1/3) exponents are tracked exactly and must fold into integer powers
of two.  Correlators of the wrong dimension type (sum of d_i+1 not divisible
by 3) vanish structurally: no term of the expansion can produce them.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations
from typing import Dict, List, Optional, Sequence, Tuple

from .asymptotics import PPolyKey, _c_shifted, a_matrix_entry_params, p_poly_product
from .errors import CancellationFailure, ExponentNotDivisible, NotComputed
from .exactmath import POLY_ONE, POLY_ZERO, PolyN, Rat, double_factorial
from .puiseux import ExpTuple, MultiSeries, geom_inverse_diff

POLY_N = PolyN.variable()


@dataclass(frozen=True)
class Correlator:
    """Doubled indices d (tau_{d/2} legs, sorted) and the exact value."""

    d: Tuple[int, ...]
    value: PolyN


@dataclass(frozen=True)
class TwoCubeScaled:
    """rational_part * 2^(two_third_exp/3), with exact 2^(1/3) bookkeeping."""

    rational_part: PolyN
    two_third_exp: int

    def fold(self) -> PolyN:
        if not self.rational_part:
            return POLY_ZERO
        if self.two_third_exp % 3:
            raise ExponentNotDivisible(
                f"2^(1/3) exponent {self.two_third_exp} does not fold"
            )
        e = self.two_third_exp // 3
        scale = Rat(2**e) if e >= 0 else Rat(1, 2**-e)
        return self.rational_part * scale


def prefactor(d: int) -> TwoCubeScaled:
    """Per-leg generating-function coefficient (-1)^(d+1) (d+1)!! 2^(-(d+1)/3)."""
    if d < 0:
        raise ValueError("doubled index must be nonnegative")
    rat = Rat((-1) ** (d + 1) * double_factorial(d + 1))
    return TwoCubeScaled(PolyN.const(rat), -(d + 1))


def dimension_ok(d: Sequence[int]) -> bool:
    """Selection rule: sum of (d_i + 1) must be divisible by 3."""
    return sum(x + 1 for x in d) % 3 == 0


# ---------------------------------------------------------------------------
# one-point closed form
# ---------------------------------------------------------------------------


def one_point(g: int) -> Correlator:
    """<tau_{(3g-1)/2}> for g >= 1, from the closed one-point series.

    The coefficient of lambda^(-(3g+1)/2) in S_1 is -2/(3g+2) P^{g+1}_{0,0};
    dividing by the leg prefactor folds all 2^(1/3) powers exactly.
    """
    if g < 1:
        raise ValueError("one_point needs g >= 1")
    d = 3 * g - 1
    coeff = p_poly_product(PPolyKey(0, 0, g + 1)) * Rat(-2, 3 * g + 2)
    pref = prefactor(d)
    inv_rat = 1 / pref.rational_part.c[0]
    value = TwoCubeScaled(coeff * inv_rat, -pref.two_third_exp).fold()
    return Correlator((d,), value)


def _genfun_rhs_coeffs(order: int) -> List[PolyN]:
    """Coefficients of u^0..u^order of e^(u^2/6) (A(u^2) + N u B(u^2)).

    A and B are the two 2F2 series of the closed one-point generating
    function, with argument -u^2/8; u stands for X^(3/2).
    """
    out = [POLY_ZERO] * (order + 1)

    def f22(half_shift: bool, n: int) -> PolyN:
        # product ((c+i)^2 - N^2), c = 1/2 for A, 1 for B
        num = POLY_ONE
        c = Rat(1, 2) if half_shift else Rat(1)
        for i in range(n):
            num = num * PolyN((((c + i) ** 2), 0, Rat(-1)))
        if half_shift:
            den = _poch(Rat(1, 2), n) ** 2
        else:
            den = _poch(Rat(1), n) * _poch(Rat(3, 2), n)
        return num * (Rat(-1, 8) ** n / (den * math.factorial(n)))

    for n in range(order // 2 + 1):
        a_n, b_n = f22(True, n), f22(False, n)
        for k in range(0, order + 1):
            # e^(u^2/6) contributes u^(2k') with weight 1/(6^k' k'!)
            rem = k
            if (rem - 2 * n) >= 0 and (rem - 2 * n) % 2 == 0:
                kp = (rem - 2 * n) // 2
                w = Rat(1, 6**kp * math.factorial(kp))
                out[k] = out[k] + a_n * w
            rem = k - 1
            if rem >= 2 * n and (rem - 2 * n) % 2 == 0:
                kp = (rem - 2 * n) // 2
                w = Rat(1, 6**kp * math.factorial(kp))
                out[k] = out[k] + b_n * POLY_N * w
    return out


def _poch(s: Rat, n: int) -> Rat:
    out = Rat(1)
    for i in range(n):
        out *= s + i
    return out


def one_point_genfun_check(gmax: int) -> bool:
    """Match one_point values against the hypergeometric generating function.

    In the variable u = X^(3/2) the left side reads
    1 + N u + sum_{g>=1} <tau_{(3g-1)/2}> u^(g+1), including the unstable
    conventions <tau_-2> = 1 and <tau_-1/2> = N.
    """
    if gmax < 1:
        raise ValueError("gmax >= 1")
    rhs = _genfun_rhs_coeffs(gmax + 1)
    if rhs[0] != POLY_ONE or rhs[1] != POLY_N:
        return False
    for g in range(1, gmax + 1):
        if one_point(g).value != rhs[g + 1]:
            return False
    return True


# ---------------------------------------------------------------------------
# n-point ordered-region expansion
# ---------------------------------------------------------------------------

MAX_POINTS = 7  # (n-1)! permutation sum; beyond this is out of desk scale

# scalar trace kernel S(x_p, x_q) = v(x_p) . u(x_q): per component,
# (exponent offset on p, offset on q, argument shifts of F-/F+, N prefactor)
_KERNEL_COMPONENTS = (
    (1, 1, 1, 1, True),
    (-1, 0, -1, 0, False),
    (0, -1, 0, -1, False),
)


@lru_cache(maxsize=None)
def _kernel_terms(order: int) -> Tuple[Tuple[int, int, PolyN], ...]:
    """S(x_p, x_q) as (e_p, e_q, PolyN) terms with exponents up to ``order``.

    Built from the shifted asymptotic coefficients: the F- side contributes
    (-1)^i C_i(N + shift) x_p^(3i + off_p), the F+ side C_j(-N + shift)
    x_q^(3j + off_q).
    """
    out: Dict[Tuple[int, int], PolyN] = {}
    for off_p, off_q, sh_minus, sh_plus, with_n in _KERNEL_COMPONENTS:
        i = 0
        while 3 * i + off_p <= order:
            left = _c_shifted(i, 1, sh_minus)
            if i % 2:
                left = -left
            if with_n:
                left = left * POLY_N
            j = 0
            while 3 * j + off_q <= order:
                right = _c_shifted(j, -1, sh_plus)
                prod = left * right
                if prod:
                    key = (3 * i + off_p, 3 * j + off_q)
                    s = out.get(key, POLY_ZERO) + prod
                    if s:
                        out[key] = s
                    elif key in out:
                        del out[key]
                j += 1
            i += 1
    return tuple((ep, eq, c) for (ep, eq), c in out.items())


def _edges(perm: Sequence[int]) -> List[Tuple[int, int]]:
    n = len(perm)
    return [(perm[k], perm[(k + 1) % n]) for k in range(n)]


def _edge_future_bounds(
    edges: Sequence[Tuple[int, int]], n: int, cap: int, order: int
) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """(min, max) total exponent contribution of each edge-list suffix."""
    mins = [0] * n
    maxs = [0] * n
    out = [(tuple(mins), tuple(maxs))]
    for p, q in reversed(edges):
        small = min(p, q)
        for v, off_min in ((p, -1), (q, -1)):
            g_min = 2 if v == small else -2 * cap
            g_max = 2 * cap + 2 if v == small else 0
            mins[v - 1] += off_min + g_min
            maxs[v - 1] += order + 1 + g_max
        out.append((tuple(mins), tuple(maxs)))
    out.reverse()
    return out  # out[s] bounds the contribution of edges[s:]


@lru_cache(maxsize=None)
def _oriented_edge_terms(
    forward: bool, cap: int, order: int
) -> Dict[Tuple[int, int], PolyN]:
    """Merged terms of S(x_p, x_q)/(lambda_p - lambda_q) for one orientation.

    ``forward`` means p < q (the expansion puts the positive geometric
    exponents on p); the backward orientation carries the antisymmetry sign.
    The geometric coefficients are +-1, so building an edge costs exponent
    bookkeeping and coefficient additions only, and the result is cached.
    """
    out: Dict[Tuple[int, int], PolyN] = {}
    for sp, sq, poly in _kernel_terms(order):
        signed = poly if forward else -poly
        for m in range(cap + 1):
            if forward:
                key = (sp + 2 * m + 2, sq - 2 * m)
            else:
                key = (sp - 2 * m, sq + 2 * m + 2)
            acc = out.get(key)
            val = signed if acc is None else acc + signed
            if val:
                out[key] = val
            elif key in out:
                del out[key]
    return out


@lru_cache(maxsize=4096)
def _edge_factor(
    p: int,
    q: int,
    n: int,
    cap: int,
    order: int,
    e_hi: Tuple[int, int],
    e_lo: Tuple[int, int],
    hard_lo: ExpTuple,
    loose_hi: ExpTuple,
) -> MultiSeries:
    """Edge factor embedded at variable slots (p, q), filtered to bounds."""
    oriented = _oriented_edge_terms(p < q, cap, order)
    terms: Dict[ExpTuple, PolyN] = {}
    lo0, lo1 = e_lo
    hi0, hi1 = e_hi
    for (ep, eq), poly in oriented.items():
        if lo0 <= ep <= hi0 and lo1 <= eq <= hi1:
            tup = [0] * n
            tup[p - 1] = ep
            tup[q - 1] = eq
            terms[tuple(tup)] = poly
    return MultiSeries._raw(n, terms, hard_lo, loose_hi)


@lru_cache(maxsize=None)
def _a_entry_terms(order: int) -> Dict[Tuple[int, int], Tuple[Tuple[int, PolyN], ...]]:
    """A(lambda) entries as (x-exponent, PolyN) term lists up to ``order``.

    The P-polynomial grouping keeps one compact series per entry; for products
    within a single variable this beats the ungrouped kernel form.
    """
    out = {}
    for r in (1, 2, 3):
        for c in (1, 2, 3):
            a, b, off, with_n = a_matrix_entry_params(r, c)
            terms = []
            k = 0
            while 3 * k + off <= order:
                p = p_poly_product(PPolyKey(a, b, k))
                if with_n:
                    p = p * POLY_N
                if p:
                    terms.append((3 * k + off, p))
                k += 1
            out[(r, c)] = tuple(terms)
    return out


def _two_point_term(
    final_lo: ExpTuple, final_hi: ExpTuple, cap: int, order: int
) -> Dict[ExpTuple, PolyN]:
    """Tr[A(x_1)A(x_2)] / (lambda_1 - lambda_2)^2 within the window.

    The trace tensor sum_{r,c} A[r,c](x_1) A[c,r](x_2) is built entrywise from
    the P-grouped series, then the two geometric factors of the cycle, which
    combine into the single derivative kernel sum_M (M+1) x_1^(2M+4) x_2^(-2M),
    are spread over it in one pass.
    """
    a_terms = _a_entry_terms(order)
    e1_cap = final_hi[0] - 4  # the spread adds at least 4 to x_1
    e2_cap = min(final_hi[1] + 2 * cap, order)
    trace: Dict[ExpTuple, PolyN] = {}
    for r in (1, 2, 3):
        for c in (1, 2, 3):
            for e1, p1 in a_terms[(r, c)]:
                if e1 > e1_cap:
                    break
                for e2, p2 in a_terms[(c, r)]:
                    if e2 > e2_cap:
                        break
                    prod = p1 * p2
                    key = (e1, e2)
                    acc = trace.get(key)
                    val = prod if acc is None else acc + prod
                    trace[key] = val
    out: Dict[ExpTuple, PolyN] = {}
    for (a1, a2), poly in trace.items():
        if not poly:
            continue
        for m in range(cap + 1):
            e = (a1 + 2 * m + 4, a2 - 2 * m)
            if not (
                final_lo[0] <= e[0] <= final_hi[0]
                and final_lo[1] <= e[1] <= final_hi[1]
            ):
                continue
            scaled = poly * (m + 1)
            acc = out.get(e)
            val = scaled if acc is None else acc + scaled
            if val:
                out[e] = val
            elif e in out:
                del out[e]
    return out


def _perm_trace_term(
    perm: Sequence[int],
    n: int,
    final_lo: ExpTuple,
    final_hi: ExpTuple,
    cap: int,
    order: int,
) -> Dict[ExpTuple, PolyN]:
    """prod_k S(x_{c_k}, x_{c_{k+1}}) / (lambda_{c_k} - lambda_{c_{k+1}}).

    Edge factors are multiplied in cycle order.  At every stage a partial
    monomial survives only if the (min, max) contribution the remaining edges
    can still make allows it to land inside [final_lo, final_hi]; the pruning
    is exact, never an approximation.  No exponent can fall below -2 - 4*cap,
    which is kept as the hard underflow boundary.
    """
    edges = _edges(perm)
    futures = _edge_future_bounds(edges, n, cap, order)
    hard_lo = tuple(-2 - 4 * cap for _ in range(n))
    loose_hi = tuple(order + 2 * cap + 3 for _ in range(n))

    def step_windows(s: int) -> Tuple[ExpTuple, ExpTuple]:
        fmin, fmax = futures[s + 1]
        plo = tuple(max(l - mx, h) for l, mx, h in zip(final_lo, fmax, hard_lo))
        hi = tuple(h - mn for h, mn in zip(final_hi, fmin))
        return plo, hi

    def build_edge(s: int) -> MultiSeries:
        p, q = edges[s]
        plo, hi = step_windows(s)
        bounds_hi = []
        bounds_lo = []
        for v in (p, q):
            fmin_here = futures[s][0][v - 1]
            fmin_next = futures[s + 1][0][v - 1]
            fmax_here = futures[s][1][v - 1]
            fmax_next = futures[s + 1][1][v - 1]
            prior_min = futures[0][0][v - 1] - fmin_here
            prior_max = futures[0][1][v - 1] - fmax_here
            bounds_hi.append(final_hi[v - 1] - fmin_next - prior_min)
            bounds_lo.append(
                max(final_lo[v - 1] - fmax_next - prior_max, -1 - 2 * cap)
            )
        return _edge_factor(
            p,
            q,
            n,
            cap,
            order,
            (bounds_hi[0], bounds_hi[1]),
            (bounds_lo[0], bounds_lo[1]),
            hard_lo,
            loose_hi,
        )

    acc = build_edge(0)
    plo0, hi0 = step_windows(0)
    acc = acc.restrict(
        tuple(max(a, b) for a, b in zip(plo0, hard_lo)),
        tuple(min(a, b) for a, b in zip(hi0, loose_hi)),
    )
    for s in range(1, n):
        plo, hi = step_windows(s)
        acc = acc.mul(build_edge(s), lo=hard_lo, hi=hi, prune_lo=plo)
    return acc.terms


def _sum_terms(
    dst: Dict[ExpTuple, PolyN], src: Dict[ExpTuple, PolyN], negate: bool = False
) -> None:
    for e, c in src.items():
        s = dst.get(e, POLY_ZERO) + (-c if negate else c)
        if s:
            dst[e] = s
        elif e in dst:
            del dst[e]


def _perm_worker(args) -> Dict[ExpTuple, PolyN]:
    perm, n, final_lo, final_hi, cap, order = args
    return _perm_trace_term(perm, n, final_lo, final_hi, cap, order)


def default_cap(dmax: int) -> int:
    return dmax + 6


def default_order(n: int, dmax: int) -> int:
    return 3 * math.ceil(n * (dmax + 2) / 3) + 6


def s_n_expansion(
    n: int,
    dmax: int,
    cap: Optional[int] = None,
    jobs: int = 1,
) -> MultiSeries:
    """Ordered-region expansion of S_n with uniform windows hi_i = dmax + 2.

    The returned window keeps the low side down to -(sum of the other hi's)
    so the cancellation of all monomials with an exponent <= 1 is verified,
    not assumed; surviving low monomials raise CancellationFailure.
    """
    if not 2 <= n <= MAX_POINTS:
        raise ValueError(f"n must be in 2..{MAX_POINTS}")
    if dmax < 0:
        raise ValueError("dmax must be nonnegative")
    if cap is None:
        cap = default_cap(dmax)
    order = default_order(n, dmax)
    hi = tuple(dmax + 2 for _ in range(n))
    lo = tuple(-(sum(hi) - hi[v]) for v in range(n))

    total: Dict[ExpTuple, PolyN] = {}
    if n == 2:
        # single cyclic class; the two geometric factors merge into the
        # derivative kernel, and the half-integer correction is subtracted
        _sum_terms(total, _two_point_term(lo, hi, cap, order))
        corr = geom_inverse_diff(
            1, 2, 2, cap, nvars=2, lo=lo, hi=hi, half_integer=True
        )
        _sum_terms(total, corr.terms, negate=True)
    else:
        perms = [(1,) + rest for rest in permutations(range(2, n + 1))]
        job_args = [(p, n, lo, hi, cap, order) for p in perms]
        if jobs > 1 and len(perms) > 1:
            with ProcessPoolExecutor(max_workers=min(jobs, os.cpu_count() or 1)) as ex:
                for terms in ex.map(_perm_worker, job_args, chunksize=1):
                    _sum_terms(total, terms, negate=True)
        else:
            for p in perms:
                _sum_terms(
                    total, _perm_trace_term(p, n, lo, hi, cap, order), negate=True
                )

    bad = [e for e in total if min(e) <= 1]
    if bad:
        raise CancellationFailure(
            f"{len(bad)} monomials with exponent <= 1 survived, e.g. {sorted(bad)[0]}; "
            "cap too small or a bug"
        )
    return MultiSeries(n, total, lo, hi)


def _extract_single_raw(
    d: Sequence[int], cap: int, jobs: int = 1
) -> PolyN:
    """Coefficient of prod x_i^(d_i+2) via per-variable tightened windows."""
    n = len(d)
    target = tuple(x + 2 for x in d)
    order = 3 * math.ceil(sum(target) / 3) + 6
    perms = [(1,) + rest for rest in permutations(range(2, n + 1))]
    total: Dict[ExpTuple, PolyN] = {}
    job_args = [(p, n, target, target, cap, order) for p in perms]
    if jobs > 1 and len(perms) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, os.cpu_count() or 1)) as ex:
            for terms in ex.map(_perm_worker, job_args, chunksize=1):
                _sum_terms(total, terms, negate=True)
    else:
        for p in perms:
            _sum_terms(
                total, _perm_trace_term(p, n, target, target, cap, order), negate=True
            )
    # the n=2 half-integer correction never reaches exponents >= 2
    return total.get(target, POLY_ZERO)


_expansion_cache: Dict[Tuple[int, int, int], MultiSeries] = {}


def cached_expansion(n: int, dmax: int, cap: int, jobs: int = 1) -> MultiSeries:
    key = (n, dmax, cap)
    if key not in _expansion_cache:
        _expansion_cache[key] = s_n_expansion(n, dmax, cap=cap, jobs=jobs)
    return _expansion_cache[key]


def extract(
    d: Sequence[int],
    dmax: Optional[int] = None,
    cap: Optional[int] = None,
    jobs: int = 1,
) -> Correlator:
    """Open intersection number with doubled indices d (any order).

    n = 1 delegates to the closed one-point form.  The MultiSeries coefficient
    is already symmetric, so it is read at the sorted tuple; for n <= 4 a
    shared expansion over all indices up to dmax is cached, larger n uses a
    tightened single-coefficient pipeline.
    """
    d = tuple(sorted(int(x) for x in d))
    if any(x < 0 for x in d):
        raise ValueError("doubled indices must be nonnegative")
    n = len(d)
    if n == 0:
        raise ValueError("need at least one index")
    if dmax is None:
        dmax = max(d)
    if max(d) > dmax:
        raise NotComputed(f"index {max(d)} beyond requested window dmax={dmax}")
    if not dimension_ok(d):
        return Correlator(d, POLY_ZERO)
    if n == 1:
        return one_point((d[0] + 1) // 3)
    if n > MAX_POINTS:
        raise ValueError(f"n beyond desk scale {MAX_POINTS}")
    if cap is None:
        cap = default_cap(dmax)
    if n <= 4:
        expansion = cached_expansion(n, dmax, cap, jobs=jobs)
        raw = expansion.coeff(tuple(x + 2 for x in d))
    else:
        raw = _extract_single_raw(d, cap, jobs=jobs)
    scaled = TwoCubeScaled(raw * _inv_prefactor_rational(d), sum(x + 1 for x in d))
    return Correlator(d, scaled.fold())


def _inv_prefactor_rational(d: Sequence[int]) -> Rat:
    inv = Rat(1)
    for x in d:
        inv /= prefactor(x).rational_part.c[0]
    return inv


def stability_check(
    d: Sequence[int], dmax: Optional[int] = None, cap: Optional[int] = None
) -> bool:
    """True iff extract(d) is unchanged when the geometric cap is doubled."""
    d = tuple(sorted(int(x) for x in d))
    if dmax is None:
        dmax = max(d)
    if cap is None:
        cap = default_cap(dmax)
    doubled = 2 * cap if cap > 0 else 4
    a = extract(d, dmax=dmax, cap=cap)
    b = extract(d, dmax=dmax, cap=doubled)
    return a.value == b.value


def extract_stable(
    d: Sequence[int],
    dmax: Optional[int] = None,
    cap: Optional[int] = None,
    jobs: int = 1,
    max_rounds: int = 6,
) -> Correlator:
    """extract with the cap escalated until one doubling leaves it unchanged.

    This is the production policy: a value is only surfaced once it survived
    a cap doubling, which is what catches under-truncated geometric sums.
    """
    d = tuple(sorted(int(x) for x in d))
    if dmax is None:
        dmax = max(d)
    if cap is None:
        cap = default_cap(dmax)
    prev = extract(d, dmax=dmax, cap=cap, jobs=jobs)
    for _ in range(max_rounds):
        cap = 2 * cap if cap > 0 else 4
        cur = extract(d, dmax=dmax, cap=cap, jobs=jobs)
        if cur.value == prev.value:
            return cur
        prev = cur
    raise NotComputed(f"cap escalation did not stabilize for d={d}")
