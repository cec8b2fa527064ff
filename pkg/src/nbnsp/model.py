"""Model layer: dispersal kernels, the bilateral gamma density, and the
cross-correlation function of the noisy bivariate cluster process.

The process observed at lag u has cross-correlation g(u) = 1 + a p(u) where p
is the density of the difference D2 - D1 of the two (causal) dispersal draws.
For gamma kernels with shapes (a1, a2) and rates (l1, l2), writing
s = a1 + a2 and L = l1 + l2, the u > 0 branch is

    p(u) = l1^a1 l2^a2 / (Gamma(a1) Gamma(a2)) e^{-l2 u} I(u),
    I(u) = int_0^inf t^{a1-1} (u + t)^{a2-1} e^{-L t} dt,

and u < 0 follows by the reflection p(u; a1, a2, l1, l2) =
p(-u; a2, a1, l2, l1).  Two evaluation paths are provided:

* a two-term Kummer-series expansion, used when s is safely away from an
  integer and z = L|u| <= 18 (beyond that the two terms cancel like e^z and
  double precision degrades past the 1e-8 agreement budget);
* tanh-sinh quadrature of I(u) with the substitution t = w^(1/a1) when
  a1 < 1, which removes the endpoint singularity exactly and is accurate to
  machine precision over the whole admissible parameter range.

Exponential kernels use the closed forms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import NumericalError
from .special import _kummer_m_core, _lgamma_pos, _lgamma_signed, _sinpi, LN_PI

__all__ = [
    "GammaKernel",
    "ExpKernel",
    "NbnspParams",
    "ParamBox",
    "kernel_pdf",
    "bilateral_gamma_pdf",
    "cross_correlation",
    "ccf_window_integral",
]

# Series admissibility: distance of a1+a2 from the nearest integer, and the
# largest L|u| before the two-term cancellation (~e^z) costs more than the
# 1e-8 relative budget.
S_DIST_MIN = 1e-3
Z_SERIES_MAX = 18.0

# tanh-sinh rule: node range and maximum refinement level.
_TS_TMAX = 3.6
# the window-mass rule must resolve the |u|^{s-1} origin singularity, whose
# transformed tail decays like exp(-s pi/2 e^t): small s needs a longer range
_TS_MASS_TMAX = 5.4
_TS_MAX_LEVEL = 11


# ---------------------------------------------------------------------------
# types

@dataclass(frozen=True)
class GammaKernel:
    """Gamma dispersal kernel with density l^a u^{a-1} e^{-l u} / Gamma(a)."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0.0 and math.isfinite(self.shape)):
            raise ValueError(f"shape must be positive, got {self.shape}")
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class ExpKernel:
    """Exponential dispersal kernel with density l e^{-l u}."""

    rate: float

    def __post_init__(self):
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be positive, got {self.rate}")


Kernel = GammaKernel | ExpKernel


@dataclass(frozen=True)
class NbnspParams:
    """Correlation parameters theta = (a, kernel1, kernel2).

    Both kernels must be the same variant: either gamma, giving the
    five-parameter model (a, shape1, shape2, rate1, rate2), or exponential,
    giving (a, rate1, rate2).
    """

    a: float
    kernel1: Kernel
    kernel2: Kernel

    def __post_init__(self):
        if not (self.a >= 0.0 and math.isfinite(self.a)):
            raise ValueError(f"amplitude must be nonnegative, got {self.a}")
        if type(self.kernel1) is not type(self.kernel2):
            raise ValueError("kernel1 and kernel2 must be the same variant")

    @property
    def is_exponential(self) -> bool:
        return isinstance(self.kernel1, ExpKernel)

    def to_vector(self) -> np.ndarray:
        """Flatten to (a, shape1, shape2, rate1, rate2) or (a, rate1, rate2)."""
        if self.is_exponential:
            return np.array([self.a, self.kernel1.rate, self.kernel2.rate])
        return np.array(
            [self.a, self.kernel1.shape, self.kernel2.shape,
             self.kernel1.rate, self.kernel2.rate]
        )

    @staticmethod
    def from_vector(vec, exponential: bool) -> "NbnspParams":
        v = [float(x) for x in vec]
        if exponential:
            if len(v) != 3:
                raise ValueError("exponential parameter vector has 3 entries")
            return NbnspParams(v[0], ExpKernel(v[1]), ExpKernel(v[2]))
        if len(v) != 5:
            raise ValueError("gamma parameter vector has 5 entries")
        return NbnspParams(v[0], GammaKernel(v[1], v[3]), GammaKernel(v[2], v[4]))


@dataclass(frozen=True)
class ParamBox:
    """Per-coordinate rectangular parameter bounds, all strictly positive."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("bounds must be 1-d arrays of equal length")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise ValueError("bounds must be finite")
        if not np.all(lo > 0.0):
            raise ValueError("lower bounds must be strictly positive")
        if not np.all(lo < hi):
            raise ValueError("need lower < upper in every coordinate")

    @property
    def dim(self) -> int:
        return self.lower.size

    def clip(self, vec: np.ndarray) -> np.ndarray:
        return np.clip(vec, self.lower, self.upper)

    def contains(self, vec: np.ndarray, rtol: float = 0.0) -> bool:
        v = np.asarray(vec, dtype=float)
        return bool(
            np.all(v >= self.lower * (1.0 - rtol) - 0.0)
            and np.all(v <= self.upper * (1.0 + rtol))
        )

    def midpoint(self) -> np.ndarray:
        # geometric midpoint, natural for positive scale parameters
        return np.sqrt(self.lower * self.upper)


# ---------------------------------------------------------------------------
# gamma-difference density: series path

@njit(cache=True)
def _p_series_pos(u, a1, a2, l1, l2):
    """Two-term Kummer expansion of p(u) for u > 0.

    Returns (value, cancel_mag, ok): cancel_mag bounds the largest signed
    contribution so callers can detect catastrophic cancellation; ok is False
    if either series hit the term cap.
    """
    s = a1 + a2
    L = l1 + l2
    z = L * u
    base = a1 * math.log(l1) + a2 * math.log(l2)
    lu = math.log(u)

    ok = True
    t1 = 0.0
    mag1 = 0.0
    sp = _sinpi(a2)
    if sp != 0.0:
        # A term: l1^a1 l2^a2 sin(pi a2)/pi Gamma(1-s) u^{s-1} e^{-l2 u} M(a1, s; z)
        lg, sg = _lgamma_signed(1.0 - s)
        m, big, _, conv = _kummer_m_core(a1, s, z)
        ok = ok and conv
        c = sg * (1.0 if sp > 0.0 else -1.0) * math.exp(
            base + math.log(abs(sp)) - LN_PI + lg + (s - 1.0) * lu - l2 * u
        )
        t1 = c * m
        # positive-term series: the rounding path is the assembled sum itself,
        # which exceeds the largest single term by ~sqrt(2 pi z)
        mag1 = abs(c) * big
        if abs(t1) > mag1:
            mag1 = abs(t1)

    # B term: l1^a1 l2^a2 rg(a1) rg(a2) Gamma(s-1) L^{1-s} e^{-l2 u} M(1-a2, 2-s; z)
    lg2, sg2 = _lgamma_signed(s - 1.0)
    m2, big2, _, conv2 = _kummer_m_core(1.0 - a2, 2.0 - s, z)
    ok = ok and conv2
    c2 = sg2 * math.exp(
        base - _lgamma_pos(a1) - _lgamma_pos(a2) + lg2 + (1.0 - s) * math.log(L)
        - l2 * u
    )
    t2 = c2 * m2
    mag2 = abs(c2) * big2
    if abs(t2) > mag2:
        mag2 = abs(t2)

    return t1 + t2, mag1 + mag2, ok


# ---------------------------------------------------------------------------
# gamma-difference density: quadrature path

@njit(cache=True)
def _I_tanh_sinh(u, a1, a2, L):
    """I(u) = int_0^inf t^{a1-1} (u+t)^{a2-1} e^{-L t} dt for u > 0.

    For a1 < 1 the substitution t = w^(1/a1) removes the left endpoint
    singularity; the upper limit is truncated where the integrand is below
    e^-60 of its scale.  Nodes are refined level by level until the running
    estimate is stable to ~1e-12 relative.
    """
    s = a1 + a2
    substitute = a1 < 1.0
    if substitute:
        X = ((60.0 + 5.0 * s) / L) ** a1
        inv = 1.0 / a1
    else:
        X = (60.0 + 5.0 * s) / L
        inv = 1.0

    acc = 0.0
    prev = -1.0
    est = 0.0
    for m in range(_TS_MAX_LEVEL + 1):
        h = 2.0 ** (-m)
        nmax = int(_TS_TMAX / h)
        k = -nmax
        while k <= nmax:
            if m == 0 or k % 2 != 0:
                t = k * h
                y = 0.5 * math.pi * math.sinh(t)
                ay = abs(y)
                w = X * 0.5 * (0.5 * math.pi) * math.cosh(t) / math.cosh(y) ** 2
                d = X / (1.0 + math.exp(2.0 * ay))
                if d > 0.0 and w > 1e-300 and math.isfinite(w):
                    x = d if t < 0.0 else X - d
                    if substitute:
                        tp = x ** inv          # physical t; underflow to 0 is benign
                        f = (u + tp) ** (a2 - 1.0) * math.exp(-L * tp) * inv
                    else:
                        f = x ** (a1 - 1.0) * (u + x) ** (a2 - 1.0) * math.exp(-L * x)
                    acc += f * w
            k += 1
        est = acc * h
        if m >= 4 and abs(est - prev) <= 1e-12 * max(abs(est), 1e-300):
            return est
        prev = est
    return est


@njit(cache=True)
def _p_quad_pos(u, a1, a2, l1, l2):
    """Quadrature evaluation of p(u) for u > 0, assembled in log space."""
    L = l1 + l2
    I = _I_tanh_sinh(u, a1, a2, L)
    if I <= 0.0:
        return 0.0
    return math.exp(
        a1 * math.log(l1) + a2 * math.log(l2)
        - _lgamma_pos(a1) - _lgamma_pos(a2) - l2 * u + math.log(I)
    )


# ---------------------------------------------------------------------------
# dispatch

@njit(cache=True)
def _p_gamma_point(u, a1, a2, l1, l2, mode):
    """p(u) for gamma kernels; mode 0 = auto, 1 = series, 2 = quadrature.

    Reflection sends u < 0 to the positive branch with indices swapped.
    Auto mode prefers the series where admissible but falls back to the
    quadrature path on non-convergence or detected cancellation.
    """
    if u < 0.0:
        u, a1, a2, l1, l2 = -u, a2, a1, l2, l1
    if mode == 2:
        return _p_quad_pos(u, a1, a2, l1, l2)
    s = a1 + a2
    z = (l1 + l2) * u
    if mode == 1:
        v, _, ok = _p_series_pos(u, a1, a2, l1, l2)
        if not ok:
            return math.nan
        return v
    if abs(s - round(s)) > S_DIST_MIN and z <= Z_SERIES_MAX:
        v, cancel, ok = _p_series_pos(u, a1, a2, l1, l2)
        # cancellation guard: keep the series only while it retains >= 8
        # digits against the assembled-term magnitude
        if ok and v > 2e-7 * cancel:
            return v
    return _p_quad_pos(u, a1, a2, l1, l2)


@njit(cache=True)
def _q_exp_point(u, l1, l2):
    """Closed-form exponential-difference density, any u != 0."""
    c = l1 * l2 / (l1 + l2)
    if u >= 0.0:
        return c * math.exp(-l2 * u)
    return c * math.exp(l1 * u)


@njit(cache=True)
def _mass_gamma_onesided(a1, a2, l1, l2, r):
    """int_0^r p(u) du for the u > 0 branch, tanh-sinh to 1e-10 absolute.

    Handles the u^{s-1} endpoint singularity (s < 1) through the rule's
    double-exponential clustering; nodes are evaluated at their distance d
    from 0 so the singular factor keeps full precision.

    Returns (value, achieved) where achieved is the last refinement delta.
    """
    acc = 0.0
    prev = -1.0
    est = 0.0
    delta = math.inf
    for m in range(_TS_MAX_LEVEL + 1):
        h = 2.0 ** (-m)
        nmax = int(_TS_MASS_TMAX / h)
        k = -nmax
        while k <= nmax:
            if m == 0 or k % 2 != 0:
                t = k * h
                y = 0.5 * math.pi * math.sinh(t)
                w = r * 0.5 * (0.5 * math.pi) * math.cosh(t) / math.cosh(y) ** 2
                d = r / (1.0 + math.exp(2.0 * abs(y)))
                if d > 0.0 and w > 1e-300 and math.isfinite(w):
                    u = d if t < 0.0 else r - d
                    acc += _p_gamma_point(u, a1, a2, l1, l2, 0) * w
            k += 1
        est = acc * h
        delta = abs(est - prev)
        if m >= 4 and delta <= 1e-10:
            return est, delta
        prev = est
    return est, delta


# ---------------------------------------------------------------------------
# public operations

def kernel_pdf(kernel: Kernel, u: float) -> float:
    """Dispersal-kernel density at displacement u.

    Zero for u < 0 (kernels are causal).  At u = 0 the gamma density with
    shape < 1 diverges, which is a domain error; shape = 1 returns the rate
    and shape > 1 returns 0.
    """
    u = float(u)
    if not math.isfinite(u):
        raise ValueError(f"u must be finite, got {u}")
    if isinstance(kernel, ExpKernel):
        shape, rate = 1.0, kernel.rate
    else:
        shape, rate = kernel.shape, kernel.rate
    if u < 0.0:
        return 0.0
    if u == 0.0:
        if shape < 1.0:
            raise ValueError("gamma density with shape < 1 diverges at u = 0")
        return rate if shape == 1.0 else 0.0
    return math.exp(
        shape * math.log(rate) + (shape - 1.0) * math.log(u) - rate * u
        - _lgamma_pos(shape)
    )


def bilateral_gamma_pdf(
    p1: GammaKernel, p2: GammaKernel, u: float, method: str = "auto"
) -> float:
    """Density of D2 - D1 at u, with D_i drawn from the two gamma kernels.

    Parameters
    ----------
    p1, p2 : GammaKernel
        Dispersal kernels of the two components.
    u : float
        Lag; must be nonzero (the density may diverge at the origin when
        shape1 + shape2 < 1).
    method : {"auto", "series", "quadrature"}
        "auto" picks the Kummer series when it is numerically safe and the
        tanh-sinh quadrature otherwise; the explicit methods force one path.
    """
    if not isinstance(p1, GammaKernel) or not isinstance(p2, GammaKernel):
        raise TypeError("bilateral_gamma_pdf needs two GammaKernel arguments")
    u = float(u)
    if u == 0.0:
        raise ValueError("bilateral density is undefined at u = 0")
    if not math.isfinite(u):
        raise ValueError(f"u must be finite, got {u}")
    a1, a2, l1, l2 = p1.shape, p2.shape, p1.rate, p2.rate
    if method == "auto":
        return _p_gamma_point(u, a1, a2, l1, l2, 0)
    if method == "quadrature":
        return _p_gamma_point(u, a1, a2, l1, l2, 2)
    if method == "series":
        s = a1 + a2
        if s == round(s):
            raise NumericalError(
                f"series path undefined: shape1+shape2 = {s} is an integer"
            )
        v = _p_gamma_point(u, a1, a2, l1, l2, 1)
        if math.isnan(v):
            raise NumericalError(
                f"Kummer series did not converge at u={u}, "
                f"shapes=({a1}, {a2}), rates=({l1}, {l2})"
            )
        return v
    raise ValueError(f"unknown method {method!r}")


def _bilateral_exp_pdf(p1: ExpKernel, p2: ExpKernel, u: float) -> float:
    if u == 0.0:
        raise ValueError("bilateral density is undefined at u = 0")
    return _q_exp_point(float(u), p1.rate, p2.rate)


def cross_correlation(params: NbnspParams, u):
    """g(u) = 1 + a p(u); accepts a scalar or an array of nonzero lags."""
    uu = np.asarray(u, dtype=float)
    scalar = uu.ndim == 0
    flat = np.atleast_1d(uu)
    if np.any(flat == 0.0) or not np.all(np.isfinite(flat)):
        raise ValueError("lags must be finite and nonzero")
    out = np.empty(flat.shape)
    if params.is_exponential:
        l1, l2 = params.kernel1.rate, params.kernel2.rate
        for i, ui in enumerate(flat):
            out[i] = 1.0 + params.a * _q_exp_point(ui, l1, l2)
    else:
        a1, a2 = params.kernel1.shape, params.kernel2.shape
        l1, l2 = params.kernel1.rate, params.kernel2.rate
        for i, ui in enumerate(flat):
            out[i] = 1.0 + params.a * _p_gamma_point(ui, a1, a2, l1, l2, 0)
    return float(out[0]) if scalar else out


def ccf_window_integral(params: NbnspParams, r: float) -> float:
    """int_{-r}^{r} g(u) du = 2r + a * (bilateral mass on [-r, r]).

    Exponential kernels use the analytic antiderivative; gamma kernels use
    tanh-sinh quadrature on each side of the origin (absolute target 1e-10),
    which tolerates the integrable |u|^{s-1} singularity at 0.
    """
    r = float(r)
    if not (r > 0.0 and math.isfinite(r)):
        raise ValueError(f"r must be positive, got {r}")
    if params.a == 0.0:
        return 2.0 * r
    if params.is_exponential:
        l1, l2 = params.kernel1.rate, params.kernel2.rate
        mass = l1 * l2 / (l1 + l2) * (
            (1.0 - math.exp(-l2 * r)) / l2 + (1.0 - math.exp(-l1 * r)) / l1
        )
        return 2.0 * r + params.a * mass
    a1, a2 = params.kernel1.shape, params.kernel2.shape
    l1, l2 = params.kernel1.rate, params.kernel2.rate
    pos, d_pos = _mass_gamma_onesided(a1, a2, l1, l2, r)
    neg, d_neg = _mass_gamma_onesided(a2, a1, l2, l1, r)
    if max(d_pos, d_neg) > 1e-8:
        raise NumericalError(
            f"window-integral quadrature stalled: achieved "
            f"{max(d_pos, d_neg):.3e} absolute on [{-r}, {r}]"
        )
    return 2.0 * r + params.a * (pos + neg)
