"""Scalar special functions used by the model layer.

Everything here is implemented from standard algorithms on top of elementary
math only (exp, log, sin, sqrt), so results are bit-stable across platforms:

* log-gamma via the Lanczos approximation (g = 7, 9 terms),
* signed gamma / reciprocal gamma through the reflection formula,
* the Kummer confluent hypergeometric function M(a, b, z) as a truncated
  power series with explicit convergence accounting.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import NumericalError

__all__ = ["lgamma", "gamma_signed", "rgamma", "sinpi", "kummer_m"]

LN_PI = 1.1447298858494001741
LN_SQRT_2PI = 0.91893853320467274178

# Lanczos (g = 7) partial-fraction coefficients.
_LANCZOS_C = np.array(
    [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ]
)

_KUMMER_MAX_TERMS = 700
_KUMMER_RTOL = 1e-15


@njit(cache=True)
def _lgamma_pos(x):
    # Lanczos approximation, valid for x >= 0.5; callers handle reflection.
    acc = _LANCZOS_C[0]
    for i in range(1, 9):
        acc += _LANCZOS_C[i] / (x - 1.0 + i)
    t = x + 6.5
    return LN_SQRT_2PI + (x - 0.5) * math.log(t) - t + math.log(acc)


@njit(cache=True)
def _sinpi(x):
    # sin(pi x) with argument reduction so large |x| keeps full precision.
    n = math.floor(x)
    r = x - n
    if r > 0.5:
        s = math.sin(math.pi * (1.0 - r))
    else:
        s = math.sin(math.pi * r)
    if int(n) % 2 != 0:
        s = -s
    return s


@njit(cache=True)
def _lgamma_signed(x):
    """(log|Gamma(x)|, sign) for non-pole x; (inf, 0) at poles."""
    if x >= 0.5:
        return _lgamma_pos(x), 1.0
    s = _sinpi(x)
    if s == 0.0:
        return math.inf, 0.0
    # reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
    val = LN_PI - math.log(abs(s)) - _lgamma_pos(1.0 - x)
    return val, (1.0 if s > 0.0 else -1.0)


@njit(cache=True)
def _gamma_signed(x):
    lg, sg = _lgamma_signed(x)
    if sg == 0.0:
        return math.inf
    return sg * math.exp(lg)


@njit(cache=True)
def _rgamma(x):
    """1/Gamma(x), exactly 0 at the poles x = 0, -1, -2, ..."""
    lg, sg = _lgamma_signed(x)
    if sg == 0.0:
        return 0.0
    return sg * math.exp(-lg)


@njit(cache=True)
def _kummer_m_core(a, b, z):
    """Series for M(a, b, z).

    Returns (value, largest |term|, n_terms, converged). The largest-term
    magnitude lets callers bound cancellation in signed combinations.
    """
    term = 1.0
    total = 1.0
    biggest = 1.0
    n = 0
    small_streak = 0
    for n in range(1, _KUMMER_MAX_TERMS + 1):
        term *= (a + n - 1.0) * z / ((b + n - 1.0) * n)
        total += term
        at = abs(term)
        if at > biggest:
            biggest = at
        if at <= _KUMMER_RTOL * abs(total):
            small_streak += 1
            if small_streak >= 2 and n >= z:
                return total, biggest, n, True
        else:
            small_streak = 0
    return total, biggest, n, False


def lgamma(x: float) -> float:
    """log|Gamma(x)| for any non-pole real x."""
    lg, sg = _lgamma_signed(float(x))
    if sg == 0.0:
        raise NumericalError(f"gamma pole at x={x}")
    return lg


def gamma_signed(x: float) -> float:
    """Gamma(x) with sign, any non-pole real x (may overflow to +-inf)."""
    v = _gamma_signed(float(x))
    if v == math.inf and float(x) <= 0 and float(x) == round(float(x)):
        raise NumericalError(f"gamma pole at x={x}")
    return v


def rgamma(x: float) -> float:
    """Reciprocal gamma 1/Gamma(x); zero at nonpositive integers."""
    return _rgamma(float(x))


def sinpi(x: float) -> float:
    return _sinpi(float(x))


def kummer_m(gamma: float, delta: float, z: float) -> float:
    """Kummer's confluent hypergeometric function M(gamma, delta; z).

    Power series summed until the next term's relative contribution drops
    below 1e-15, with a hard term cap.

    Parameters
    ----------
    gamma, delta : float
        Series parameters; ``delta`` must not be a nonpositive integer.
    z : float
        Nonnegative argument.

    Raises
    ------
    NumericalError
        If the term cap is reached before convergence (callers fall back to
        the quadrature path of the density).
    """
    g, d, z = float(gamma), float(delta), float(z)
    if z < 0.0:
        raise ValueError(f"z must be nonnegative, got {z}")
    if d <= 0.0 and d == round(d):
        raise ValueError(f"delta must not be a nonpositive integer, got {d}")
    val, biggest, n, ok = _kummer_m_core(g, d, z)
    if not ok:
        raise NumericalError(
            f"Kummer series did not converge: a={g}, b={d}, z={z}, "
            f"terms={n}, last_total={val}, max_term={biggest}"
        )
    return val
