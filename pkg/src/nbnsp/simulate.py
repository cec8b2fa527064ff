"""Seeded generation of the noisy bivariate cluster process.

Parents form a homogeneous Poisson process on [-parent_margin, T]; each
parent independently spawns Poisson(sigma_i) offspring in component i,
displaced by i.i.d. draws from that component's causal dispersal kernel;
independent homogeneous Poisson noise is superposed on [0, T]; everything
landing outside [0, T] is discarded.

The random stream is consumed in a fixed documented order (parent count,
parent positions, component-1 offspring counts, component-2 offspring counts,
component-1 displacements parent-major, component-2 displacements, noise-1
count and positions, noise-2 count and positions) so a (config, seed) pair
pins the output bit-for-bit regardless of platform or scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .model import ExpKernel, GammaKernel, Kernel
from .rng import _next_gamma, _next_poisson, _next_uniform

__all__ = ["SimConfig", "PointPattern", "simulate_nbnsp", "simulate_poisson"]


def default_parent_margin(kernel1: Kernel, kernel2: Kernel) -> float:
    """40 mean scales of the slower kernel; gamma tail mass beyond that is
    negligible at double precision."""
    return 40.0 * max(1.0 / kernel1.rate, 1.0 / kernel2.rate)


@dataclass(frozen=True)
class SimConfig:
    """Generative settings for one simulated window [0, horizon]."""

    parent_intensity: float
    offspring_mean1: float
    offspring_mean2: float
    kernel1: Kernel
    kernel2: Kernel
    noise_intensity1: float
    noise_intensity2: float
    horizon: float
    parent_margin: float | None = None

    def __post_init__(self):
        if not (self.parent_intensity > 0.0):
            raise ValueError("parent_intensity must be positive")
        if not (self.offspring_mean1 > 0.0 and self.offspring_mean2 > 0.0):
            raise ValueError("offspring means must be positive")
        if self.noise_intensity1 < 0.0 or self.noise_intensity2 < 0.0:
            raise ValueError("noise intensities must be nonnegative")
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be positive and finite")
        if self.parent_margin is None:
            object.__setattr__(
                self, "parent_margin",
                default_parent_margin(self.kernel1, self.kernel2),
            )
        elif self.parent_margin < 0.0:
            raise ValueError("parent_margin must be nonnegative")

    def intensity(self, component: int) -> float:
        """Stationary intensity lambda_i = lambda sigma_i + lambda_i^B."""
        if component == 1:
            return self.parent_intensity * self.offspring_mean1 + self.noise_intensity1
        if component == 2:
            return self.parent_intensity * self.offspring_mean2 + self.noise_intensity2
        raise ValueError("component must be 1 or 2")


@dataclass(frozen=True)
class PointPattern:
    """Two sorted point sequences observed on the common window [0, horizon].

    Times are strictly increasing within each component (ties rejected);
    coincident timestamps across components are allowed and flagged.
    """

    times1: np.ndarray
    times2: np.ndarray
    horizon: float
    has_cross_ties: bool = field(init=False, default=False)

    def __post_init__(self):
        t1 = np.ascontiguousarray(np.asarray(self.times1, dtype=float))
        t2 = np.ascontiguousarray(np.asarray(self.times2, dtype=float))
        object.__setattr__(self, "times1", t1)
        object.__setattr__(self, "times2", t2)
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be positive and finite")
        for name, t in (("times1", t1), ("times2", t2)):
            if t.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            if t.size and not np.all(np.isfinite(t)):
                raise ValueError(f"{name} contains non-finite values")
            if t.size and (t[0] < 0.0 or t[-1] > self.horizon):
                raise ValueError(f"{name} has points outside [0, horizon]")
            if t.size > 1 and not np.all(np.diff(t) > 0.0):
                raise ValueError(f"{name} must be strictly increasing (ties rejected)")
        if t1.size and t2.size:
            ties = np.isin(t1, t2, assume_unique=True).any()
            object.__setattr__(self, "has_cross_ties", bool(ties))

    @property
    def n1(self) -> int:
        return self.times1.size

    @property
    def n2(self) -> int:
        return self.times2.size


@njit(cache=True)
def _sim_poisson_core(state, intensity, horizon):
    n, state = _next_poisson(state, intensity * horizon)
    out = np.empty(n)
    for i in range(n):
        u, state = _next_uniform(state)
        out[i] = horizon * u
    return np.sort(out), state


@njit(cache=True)
def _sim_component(state, parents, offspring_mean, is_exp, shape, rate, horizon):
    n_par = parents.size
    counts = np.empty(n_par, dtype=np.int64)
    total = 0
    for i in range(n_par):
        counts[i], state = _next_poisson(state, offspring_mean)
        total += counts[i]
    pts = np.empty(total)
    kept = 0
    for i in range(n_par):
        for _ in range(counts[i]):
            if is_exp:
                u, state = _next_uniform(state)
                d = -math.log(u) / rate
            else:
                g, state = _next_gamma(state, shape)
                d = g / rate
            t = parents[i] + d
            if 0.0 <= t <= horizon:
                pts[kept] = t
                kept += 1
    return pts[:kept], state


@njit(cache=True)
def _sim_nbnsp_core(
    state, lam, sig1, sig2, is_exp1, shape1, rate1, is_exp2, shape2, rate2,
    noise1, noise2, horizon, margin,
):
    span = horizon + margin
    n_par, state = _next_poisson(state, lam * span)
    parents = np.empty(n_par)
    for i in range(n_par):
        u, state = _next_uniform(state)
        parents[i] = -margin + span * u
    pts1, state = _sim_component(state, parents, sig1, is_exp1, shape1, rate1, horizon)
    pts2, state = _sim_component(state, parents, sig2, is_exp2, shape2, rate2, horizon)
    nz1 = np.empty(0)
    nz2 = np.empty(0)
    if noise1 > 0.0:
        nz1, state = _sim_poisson_core(state, noise1, horizon)
    if noise2 > 0.0:
        nz2, state = _sim_poisson_core(state, noise2, horizon)
    return np.sort(np.concatenate((pts1, nz1))), np.sort(np.concatenate((pts2, nz2)))


def _kernel_fields(kernel: Kernel) -> tuple[bool, float, float]:
    if isinstance(kernel, ExpKernel):
        return True, 1.0, kernel.rate
    return False, kernel.shape, kernel.rate


def simulate_poisson(intensity: float, horizon: float, seed: int) -> np.ndarray:
    """Homogeneous Poisson points on [0, horizon], sorted, deterministic."""
    if intensity < 0.0:
        raise ValueError("intensity must be nonnegative")
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")
    if intensity == 0.0:
        return np.empty(0)
    state = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    pts, _ = _sim_poisson_core(state, float(intensity), float(horizon))
    return pts


def simulate_nbnsp(config: SimConfig, seed: int) -> PointPattern:
    """Draw one realization of the noisy bivariate cluster process.

    Deterministic given (config, seed).  In the measure-zero event that two
    points of one component coincide in floating point, duplicates are
    dropped so the pattern invariant (strictly increasing times) holds.
    """
    state = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    e1, s1, r1 = _kernel_fields(config.kernel1)
    e2, s2, r2 = _kernel_fields(config.kernel2)
    t1, t2 = _sim_nbnsp_core(
        state,
        config.parent_intensity,
        config.offspring_mean1,
        config.offspring_mean2,
        e1, s1, r1, e2, s2, r2,
        config.noise_intensity1,
        config.noise_intensity2,
        config.horizon,
        config.parent_margin,
    )
    if t1.size > 1:
        t1 = np.unique(t1)
    if t2.size > 1:
        t2 = np.unique(t2)
    return PointPattern(t1, t2, config.horizon)
