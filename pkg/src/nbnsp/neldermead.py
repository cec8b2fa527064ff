"""Nelder-Mead simplex minimizer.

Standard coefficients (reflection 1, expansion 2, contraction 0.5,
shrink 0.5).  Convergence requires both the function spread and the simplex
diameter to fall under their tolerances; optional restarts rebuild a smaller
simplex around the incumbent and keep the best result, which guards against
premature collapse on narrow valleys.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["NelderMeadSettings", "nelder_mead"]


@dataclass(frozen=True)
class NelderMeadSettings:
    max_iters: int = 4000
    f_tol: float = 1e-8
    x_tol: float = 1e-6
    init_step: float = 0.25
    restarts: int = 1

    def __post_init__(self):
        if self.max_iters <= 0:
            raise ValueError("max_iters must be positive")
        if not (self.f_tol > 0.0 and self.x_tol > 0.0 and self.init_step > 0.0):
            raise ValueError("tolerances and init_step must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")


def _run_simplex(f, x0, step, settings, budget):
    """One simplex descent from x0; returns (x, fx, evals_used, converged)."""
    n = x0.size
    pts = np.empty((n + 1, n))
    pts[0] = x0
    for i in range(n):
        pts[i + 1] = x0
        pts[i + 1, i] += step
    vals = np.array([f(p) for p in pts])
    used = n + 1
    converged = False

    while used < budget:
        order = np.argsort(vals, kind="stable")
        pts, vals = pts[order], vals[order]
        if (
            vals[-1] - vals[0] < settings.f_tol
            and np.max(np.abs(pts[1:] - pts[0])) < settings.x_tol
        ):
            converged = True
            break

        centroid = pts[:-1].mean(axis=0)
        xr = centroid + (centroid - pts[-1])
        fr = f(xr)
        used += 1
        if vals[0] <= fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
        elif fr < vals[0]:
            xe = centroid + 2.0 * (centroid - pts[-1])
            fe = f(xe)
            used += 1
            if fe < fr:
                pts[-1], vals[-1] = xe, fe
            else:
                pts[-1], vals[-1] = xr, fr
        else:
            if fr < vals[-1]:
                xc = centroid + 0.5 * (centroid - pts[-1])
            else:
                xc = centroid - 0.5 * (centroid - pts[-1])
            fc = f(xc)
            used += 1
            if fc < min(fr, vals[-1]):
                pts[-1], vals[-1] = xc, fc
            else:
                # shrink toward the best vertex
                for i in range(1, n + 1):
                    pts[i] = pts[0] + 0.5 * (pts[i] - pts[0])
                    vals[i] = f(pts[i])
                used += n

    best = int(np.argmin(vals))
    return pts[best].copy(), float(vals[best]), used, converged


def nelder_mead(f, x0, settings: NelderMeadSettings):
    """Minimize f from x0.

    Returns (x_best, f_best, evaluations, converged).  With restarts > 0 the
    search reruns from the incumbent with a quarter-size simplex; the result
    is converged only if the final descent converged.
    """
    x = np.asarray(x0, dtype=float).copy()
    step = settings.init_step
    total = 0
    best_x, best_f = x, np.inf
    converged = False
    for attempt in range(settings.restarts + 1):
        budget = settings.max_iters - total
        if budget <= 0:
            break
        x1, f1, used, conv = _run_simplex(f, best_x if attempt else x, step, settings, budget)
        total += used
        if f1 < best_f:
            best_x, best_f = x1, f1
        converged = conv
        step = settings.init_step * 0.25
    return best_x, best_f, total, converged
