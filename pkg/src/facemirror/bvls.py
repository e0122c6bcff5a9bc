"""Bounded-variable least squares by an exact active-set method.

Solves ``min ||A x - b||^2 + ridge * ||x||^2  s.t.  lower_i <= x_i <= upper_i``.
Deterministic, finite for strictly convex problems, and cheap at the
dimensions used here (a few hundred unknowns at most).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverNonConvergence

FREE, AT_LOWER, AT_UPPER = 0, -1, 1


@dataclass(frozen=True)
class BoxLsqResult:
    x: np.ndarray
    on_bound: np.ndarray  # per-coordinate: 0 free, -1 at lower, +1 at upper
    iterations: int


def solve_box_lsq(
    a: np.ndarray,
    b: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    ridge: float = 0.0,
    max_iter: int | None = None,
) -> BoxLsqResult:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = a.shape
    if n == 0:
        return BoxLsqResult(np.zeros(0), np.zeros(0, dtype=np.int8), 0)
    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), (n,))
    upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), (n,))
    if np.any(lower > upper):
        raise ValueError("lower bound exceeds upper bound")
    if max_iter is None:
        max_iter = 10 * n

    # Fold the ridge term into extra rows so one code path handles both cases.
    if ridge > 0.0:
        a = np.vstack([a, np.sqrt(ridge) * np.eye(n)])
        b = np.concatenate([b, np.zeros(n)])

    # Gradient tolerance for KKT release tests, scaled to the problem.
    g_scale = max(1.0, float(np.max(np.abs(a.T @ b), initial=0.0)))
    kkt_tol = 1e-11 * g_scale

    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    on_bound = np.zeros(n, dtype=np.int8)
    below, above = x <= lower, x >= upper
    x = np.clip(x, lower, upper)
    on_bound[below] = AT_LOWER
    on_bound[above] = AT_UPPER

    iterations = 0
    while True:
        iterations += 1
        if iterations > max_iter:
            raise SolverNonConvergence(f"active-set did not converge within {max_iter} iterations")

        free = on_bound == FREE
        if free.any():
            rhs = b - a[:, ~free] @ x[~free] if (~free).any() else b
            cand, *_ = np.linalg.lstsq(a[:, free], rhs, rcond=None)
            cur = x[free]
            lo, up = lower[free], upper[free]
            if np.all(cand >= lo - 1e-14) and np.all(cand <= up + 1e-14):
                x[free] = np.clip(cand, lo, up)
            else:
                # Step from the current point toward the candidate until the
                # first coordinate hits its bound; clamp every blocker.
                d = cand - cur
                with np.errstate(divide="ignore", invalid="ignore"):
                    step_up = np.where(d > 0, (up - cur) / d, np.inf)
                    step_dn = np.where(d < 0, (lo - cur) / d, np.inf)
                steps = np.minimum(step_up, step_dn)
                alpha = max(0.0, float(np.min(steps)))
                moved = cur + alpha * d
                blocked = steps <= alpha + 1e-15
                moved[blocked & (d > 0)] = up[blocked & (d > 0)]
                moved[blocked & (d < 0)] = lo[blocked & (d < 0)]
                x[free] = moved
                marks = on_bound[free]
                marks[blocked & (d > 0)] = AT_UPPER
                marks[blocked & (d < 0)] = AT_LOWER
                on_bound[free] = marks
                continue

        # KKT check: release the worst-violating clamped coordinate, if any.
        g = a.T @ (a @ x - b)
        violation = np.zeros(n)
        at_lower = on_bound == AT_LOWER
        at_upper = on_bound == AT_UPPER
        violation[at_lower] = np.maximum(0.0, -g[at_lower])
        violation[at_upper] = np.maximum(0.0, g[at_upper])
        worst = int(np.argmax(violation))
        if violation[worst] <= kkt_tol:
            return BoxLsqResult(x, on_bound, iterations)
        on_bound[worst] = FREE
