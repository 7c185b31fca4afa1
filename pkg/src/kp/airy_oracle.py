"""Floating-point quadrature oracle for the Airy-type integrals.

Independent numeric ground truth: f(lambda; N) and g(lambda; N) are computed
by adaptive Gauss-Legendre quadrature along contours deformed into the decay
sectors of exp(i x^3/3), and the finite-size partition function Z_n (n <= 2)
is assembled from f values through the Wronskian determinant.  These values
validate the exact asymptotic series (and, downstream, the symbolic log Z)
at machine precision without sharing any code path with the series engine.

Results are plain complex numbers; quantities that must be real are checked
against a relative imaginary-part bound and returned as is, so callers can
inspect both parts.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .asymptotics import c_coeff
from .errors import NonRealResult, QuadratureNoConverge

_GAUSS_CACHE: dict = {}


def _gauss_nodes(n: int):
    if n not in _GAUSS_CACHE:
        _GAUSS_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GAUSS_CACHE[n]


def _gauss_panel(f, a: float, b: float, n: int = 32) -> complex:
    x, w = _gauss_nodes(n)
    mid, half = (a + b) / 2.0, (b - a) / 2.0
    return half * np.sum(w * f(mid + half * x))


def _adaptive_panel(f, a, b, tol, depth=0) -> complex:
    coarse = _gauss_panel(f, a, b, 32)
    mid = (a + b) / 2.0
    fine = _gauss_panel(f, a, mid, 32) + _gauss_panel(f, mid, b, 32)
    err = abs(fine - coarse)
    # relative floor: once the refinement disagreement is at rounding level
    # of the panel itself, further splitting only reshuffles noise
    if err <= max(tol, 5e-15 * abs(fine)) or depth >= 14:
        if depth >= 14 and err > max(100 * tol, 1e-11 * abs(fine)):
            raise QuadratureNoConverge(
                f"panel [{a}, {b}] stuck at error {err:.3e}"
            )
        return fine
    return _adaptive_panel(f, a, mid, tol / 2, depth + 1) + _adaptive_panel(
        f, mid, b, tol / 2, depth + 1
    )


def _ray_integral(f, rel_tail: float = 1e-18, max_t: float = 1e6) -> complex:
    """Integral of f over t in [0, inf) with geometric tail extension.

    Each segment is integrated adaptively; segments double in length until a
    whole segment contributes less than ``rel_tail`` of the running total.
    """
    total = 0.0 + 0.0j
    a, width = 0.0, 1.0
    while a < max_t:
        seg = _adaptive_panel(f, a, a + width, tol=1e-17 * max(1.0, abs(total)))
        total += seg
        a += width
        width *= 2.0
        if abs(seg) < rel_tail * max(abs(total), 1e-300) and a > 4.0:
            return total
    raise QuadratureNoConverge("ray integral tail did not fall below threshold")


def f_num(lam: float, N: int, h: float | None = None) -> complex:
    """f(lambda; N) by quadrature along the deformed two-ray contour.

    The contour runs from infinity * e^(5 i pi/6) down to i*h and out to
    infinity * e^(i pi/6); both rays lie in the decay sectors and the corner
    at i*h keeps x = 0 (a pole for N >= 1) at distance h.  By default h is
    sqrt(lambda), the saddle height: there the integrand peaks at the scale
    of the answer itself, so no digits are lost to oscillatory cancellation
    (a fixed h loses about lambda^(3/2) digits as lambda grows).  Any h > 0
    gives the same value by contour deformation, at reduced accuracy.  The
    result must be real for real lambda up to quadrature noise.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if h is None:
        h = math.sqrt(lam)
    corner = 1j * h
    right = np.exp(1j * np.pi / 6)
    left = np.exp(5j * np.pi / 6)

    def integrand(dirn):
        def f(t):
            x = corner + t * dirn
            return x ** (-N) * np.exp(1j * x**3 / 3 + 1j * x * lam) * dirn

        return f

    val = _ray_integral(integrand(right)) - _ray_integral(integrand(left))
    val *= (1j) ** N / math.sqrt(2 * math.pi)
    if abs(val.imag) > 1e-9 * max(abs(val.real), 1e-300):
        raise NonRealResult(f"f({lam};{N}) = {val}: imaginary part too large")
    return complex(val)


def g_num(lam: float, N: int) -> complex:
    """g(lambda; N) by quadrature along the ray arg x = pi/6; g(.; 0) = 1."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if N == 0:
        return 1.0 + 0.0j
    if N < 0:
        raise ValueError("g_num needs N >= 0")
    ray = np.exp(1j * np.pi / 6)

    def f(t):
        t = np.asarray(t, dtype=np.complex128)
        x = t * ray
        return x ** (N - 1) * np.exp(1j * x**3 / 3 + 1j * x * lam) * ray

    val = _ray_integral(f) * (-1j) ** N / math.gamma(N)
    if abs(val.imag) > 1e-9 * max(abs(val.real), 1e-300):
        raise NonRealResult(f"g({lam};{N}) = {val}: imaginary part too large")
    return complex(val)


def f_series_value(lam: float, N: int, K: int) -> float:
    """Partial sum of F_-(lambda; N) with K+1 terms, evaluated in floats."""
    s = 0.0
    for j in range(K + 1):
        cj = float(c_coeff(j).eval(N))
        s += (-1) ** j * cj * lam ** (-1.5 * j)
    return s


def asymptotic_prefactor(lam: float, N: int) -> float:
    return math.exp(-2.0 / 3.0 * lam**1.5) / (math.sqrt(2.0) * lam ** (N / 2 + 0.25))


def asymptotic_residual(lam: float, N: int, K: int) -> float:
    """Relative deviation |f_num / (prefactor * partial sum) - 1|."""
    if lam < 4:
        raise ValueError("asymptotic probes use lambda >= 4")
    approx = asymptotic_prefactor(lam, N) * f_series_value(lam, N, K)
    return abs(f_num(lam, N).real / approx - 1.0)


def f_scaled(lam: float, N: int) -> float:
    """sqrt(2) lambda^(N/2+1/4) e^((2/3)lambda^(3/2)) f(lambda;N), an O(1) number.

    This is the numeric estimate of the series F_-(lambda; N); working with it
    keeps the Wronskian assembly free of exponential overflow.
    """
    return f_num(lam, N).real / asymptotic_prefactor(lam, N)


def z_num(yvec: Sequence[float], N: int) -> float:
    """Z_n for n <= 2 from f values and the explicit Wronskian prefactors.

    All exponential and power prefactors are folded analytically into the
    scaled values, so only O(1) quantities are combined:
      n=1:  Z_1 = phi_1(N)
      n=2:  Z_2 = (y_2 phi_1(N) phi_2(N-1) - y_1 phi_2(N) phi_1(N-1))/(y_2 - y_1)
    with phi_k(M) = sqrt(2) y_k^(M+1/2) e^((2/3) y_k^3) f(y_k^2; M).
    """
    ys = list(yvec)
    if len(ys) == 1:
        return f_scaled(ys[0] ** 2, N)
    if len(ys) != 2:
        raise ValueError("z_num supports 1 or 2 points")
    y1, y2 = ys
    if y1 == y2:
        raise ValueError("points must be distinct")
    phi = {
        (1, N): f_scaled(y1**2, N),
        (1, N - 1): f_scaled(y1**2, N - 1),
        (2, N): f_scaled(y2**2, N),
        (2, N - 1): f_scaled(y2**2, N - 1),
    }
    # phi_k(M) = sqrt(2) y_k^(M+1/2) e^(2/3 y_k^3) f(y_k^2; M); dividing the
    # Wronskian row entries by these factors leaves the y-linear combination
    return (phi[(1, N)] * phi[(2, N - 1)] * y2 - phi[(2, N)] * phi[(1, N - 1)] * y1) / (
        y2 - y1
    )
