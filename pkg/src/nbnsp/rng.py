"""Deterministic splittable random number generation.

A splitmix64 stream underlies everything: 64-bit state advanced by the golden
gamma, finalized by the standard avalanche mixer.  Child streams for Monte
Carlo replication k are seeded from the k-th output of the parent stream's
mixer, so (base_seed, k) pins the replication's entire randomness regardless
of scheduling order.

Samplers (all consuming the stream in a fixed documented order):

* uniforms on (0, 1] from the top 53 bits,
* normals by Box-Muller,
* gamma variates by the Marsaglia-Tsang squeeze (shape < 1 boosted through
  the U^(1/shape) power trick),
* Poisson counts by Knuth's product method below mean 10 and the PTRS
  transformed-rejection sampler above.

Everything is implemented on elementary operations so that streams are
bit-identical across platforms.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .special import _lgamma_pos

__all__ = ["Rng", "child_seed"]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 1.0 / 9007199254740992.0  # 2^-53


@njit(cache=True)
def _mix64(z):
    z = np.uint64(z)
    z ^= z >> np.uint64(30)
    z *= _MIX1
    z ^= z >> np.uint64(27)
    z *= _MIX2
    z ^= z >> np.uint64(31)
    return z


@njit(cache=True)
def _next64(state):
    # returns (output, new_state)
    s = np.uint64(state) + _GOLDEN
    return _mix64(s), s


@njit(cache=True)
def _next_uniform(state):
    x, state = _next64(state)
    # top 53 bits, shifted into (0, 1]
    return (float(x >> np.uint64(11)) + 1.0) * _U53, state


@njit(cache=True)
def _next_normal_pair(state):
    u1, state = _next_uniform(state)
    u2, state = _next_uniform(state)
    rad = math.sqrt(-2.0 * math.log(u1))
    ang = 2.0 * math.pi * u2
    return rad * math.cos(ang), rad * math.sin(ang), state


@njit(cache=True)
def _next_gamma(state, shape):
    """One gamma(shape, 1) variate by Marsaglia-Tsang."""
    boost = 1.0
    if shape < 1.0:
        u, state = _next_uniform(state)
        boost = u ** (1.0 / shape)
        shape = shape + 1.0
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x, _, state = _next_normal_pair(state)  # second normal discarded
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u, state = _next_uniform(state)
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return boost * d * v, state
        if math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return boost * d * v, state


@njit(cache=True)
def _next_poisson(state, mean):
    """One Poisson(mean) count; Knuth below mean 10, PTRS above."""
    if mean <= 0.0:
        return 0, state
    if mean < 10.0:
        limit = math.exp(-mean)
        k = 0
        prod = 1.0
        while True:
            u, state = _next_uniform(state)
            prod *= u
            if prod <= limit:
                return k, state
            k += 1
    # PTRS transformed rejection (Hoermann)
    b = 0.931 + 2.53 * math.sqrt(mean)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_mu = math.log(mean)
    while True:
        u, state = _next_uniform(state)
        u -= 0.5
        v, state = _next_uniform(state)
        us = 0.5 - abs(u)
        k = int(math.floor((2.0 * a / us + b) * u + mean + 0.43))
        if us >= 0.07 and v <= v_r:
            return k, state
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (
            math.log(v * inv_alpha / (a / (us * us) + b))
            <= k * log_mu - mean - _lgamma_pos(k + 1.0)
        ):
            return k, state


@njit(cache=True)
def _fill_uniform(state, out):
    for i in range(out.size):
        out[i], state = _next_uniform(state)
    return state


@njit(cache=True)
def _fill_normal(state, out):
    i = 0
    n = out.size
    while i + 1 < n:
        out[i], out[i + 1], state = _next_normal_pair(state)
        i += 2
    if i < n:
        x, _, state = _next_normal_pair(state)
        out[i] = x
    return state


@njit(cache=True)
def _fill_gamma(state, shape, out):
    for i in range(out.size):
        out[i], state = _next_gamma(state, shape)
    return state


@njit(cache=True)
def _child_seed(base, k):
    # k-th output of the splitmix stream at `base`
    return _mix64(np.uint64(base) + np.uint64(k + 1) * _GOLDEN)


def child_seed(base_seed: int, k: int) -> int:
    """Derived 64-bit seed for replication k; injective and well mixed."""
    if k < 0:
        raise ValueError("replication index must be nonnegative")
    return int(_child_seed(np.uint64(base_seed & 0xFFFFFFFFFFFFFFFF), np.uint64(k)))


class Rng:
    """Splittable deterministic generator over a splitmix64 stream."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)

    @property
    def state(self) -> int:
        return int(self._state)

    def child(self, k: int) -> "Rng":
        """Independent stream keyed by (this stream's state, k)."""
        return Rng(child_seed(int(self._state), k))

    # jitted helpers box the returned state as a Python int, which the
    # dispatcher will not always re-admit once it exceeds 2^63; store it
    # back as uint64 so every call site sees the same type

    def uniform(self, n: int | None = None):
        """Uniform draws on (0, 1]."""
        if n is None:
            u, state = _next_uniform(self._state)
            self._state = np.uint64(state)
            return u
        out = np.empty(int(n))
        self._state = np.uint64(_fill_uniform(self._state, out))
        return out

    def normal(self, n: int | None = None):
        if n is None:
            x, _, state = _next_normal_pair(self._state)
            self._state = np.uint64(state)
            return x
        out = np.empty(int(n))
        self._state = np.uint64(_fill_normal(self._state, out))
        return out

    def gamma(self, shape: float, n: int | None = None):
        """Gamma(shape, rate=1) draws; scale by 1/rate for other rates."""
        if not shape > 0.0:
            raise ValueError("shape must be positive")
        if n is None:
            x, state = _next_gamma(self._state, float(shape))
            self._state = np.uint64(state)
            return x
        out = np.empty(int(n))
        self._state = np.uint64(_fill_gamma(self._state, float(shape), out))
        return out

    def poisson(self, mean: float) -> int:
        if mean < 0.0:
            raise ValueError("mean must be nonnegative")
        k, state = _next_poisson(self._state, float(mean))
        self._state = np.uint64(state)
        return int(k)
