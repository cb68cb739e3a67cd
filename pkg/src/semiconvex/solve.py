"""Accelerated first-order descent for strongly convex objectives.

One solver backs every inner problem in the package: resolvent
evaluations, fiber argmin solves, and (negated) sup-convolution inner
ascents.  It is Nesterov's constant-momentum scheme for strongly convex
functions, in one of two modes:

- adaptive: Armijo backtracking on a local curvature estimate with a
  function-value restart (used when no smoothness bound is certified);
- fixed: when a certified gradient-Lipschitz bound is supplied the step
  is constant and no function values are evaluated at all, with a
  gradient-alignment restart.

Both modes stop on a certified gradient norm (projected-gradient mapping
norm for box-constrained problems).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = ["ConvergenceError", "SolveResult", "minimize_strongly_convex"]


class ConvergenceError(RuntimeError):
    """Iteration budget exhausted before reaching the requested tolerance."""

    def __init__(self, message: str, result: Optional["SolveResult"] = None):
        super().__init__(message)
        self.result = result


@dataclass
class SolveResult:
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool


def _norm(v: np.ndarray) -> float:
    return math.sqrt(float(v @ v))


def minimize_strongly_convex(
    value: Optional[Callable[[np.ndarray], float]],
    grad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    *,
    strong_convexity: float = 1.0,
    tol: float = 1e-9,
    max_iter: int = 100_000,
    l0: Optional[float] = None,
    lipschitz: Optional[float] = None,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> SolveResult:
    """Minimize a strongly convex objective to gradient norm <= tol.

    ``strong_convexity`` must be a certified lower bound on the modulus.
    With ``lipschitz`` set (a certified upper curvature bound) the solver
    runs value-free with a constant step; ``value`` may then be None and
    is only used, when present, to fill the reported objective value.
    """
    m = float(strong_convexity)
    if m <= 0:
        raise ValueError("strong_convexity must be positive")
    x = np.asarray(x0, dtype=float).copy()
    if project is not None:
        x = project(x)
    x_prev = x

    if lipschitz is not None:
        return _fixed_step(value, grad, x, m, float(lipschitz), tol, max_iter,
                           project)

    if value is None:
        raise ValueError("value callable is required without a lipschitz bound")
    f_x = value(x)
    L = float(l0) if l0 else max(1.0, m)
    best = SolveResult(x, f_x, math.inf, 0, False)
    best_gn = math.inf
    last_improve = 0

    for k in range(1, max_iter + 1):
        sl, sm = math.sqrt(L), math.sqrt(m)
        beta = (sl - sm) / (sl + sm)
        y = x + beta * (x - x_prev)
        if project is not None:
            y = project(y)
        g = grad(y)
        gn = _norm(g)
        f_y = value(y)

        # Armijo backtracking on the curvature estimate L.
        while True:
            x_trial = y - g / L
            if project is not None:
                x_trial = project(x_trial)
            d = x_trial - y
            f_trial = value(x_trial)
            if f_trial <= f_y + float(g @ d) + 0.5 * L * float(d @ d) + 1e-15 * (1 + abs(f_y)):
                break
            L *= 2.0
            if L > 1e18:
                raise ConvergenceError(
                    "backtracking stalled (objective not smooth at this scale)",
                    best,
                )

        restart = f_trial > f_x
        x_prev = x_trial if restart else x
        x, f_x = x_trial, f_trial

        if project is None:
            if gn <= 0.5 * tol:
                g_x = grad(x)
                res = _norm(g_x)
                if res <= tol:
                    return SolveResult(x, f_trial, res, k, True)
                gn = res
        else:
            res = L * _norm(d)
            if res <= tol:
                return SolveResult(x, f_trial, res, k, True)
            gn = res

        if gn < best.grad_norm:
            best = SolveResult(x, f_trial, gn, k, False)
        if gn < 0.999 * best_gn:
            best_gn = gn
            last_improve = k
            L = max(L * 0.7, m)
        elif k - last_improve >= 8:
            # Gradient norm stalled: the Armijo slack is masking a step at
            # the reflection scale, so the curvature estimate is too small.
            L = min(L * 2.0, 1e18)
            last_improve = k

    return best


def _fixed_step(value, grad, x, m, lipschitz, tol, max_iter, project):
    """Constant-step Nesterov with gradient-alignment restart; value-free."""
    L = max(lipschitz, m)
    sl, sm = math.sqrt(L), math.sqrt(m)
    beta = (sl - sm) / (sl + sm)
    x_prev = x
    best = SolveResult(x, math.nan, math.inf, 0, False)

    for k in range(1, max_iter + 1):
        y = x + beta * (x - x_prev)
        if project is not None:
            y = project(y)
        g = grad(y)
        gn = _norm(g)
        x_trial = y - g / L
        if project is not None:
            x_trial = project(x_trial)

        # O'Donoghue-Candes gradient restart: momentum against the gradient.
        if float(g @ (x_trial - x)) > 0.0:
            x_prev = x_trial
        else:
            x_prev = x
        d = x_trial - y
        x = x_trial

        if project is None:
            if gn <= 0.5 * tol:
                g_x = grad(x)
                res = _norm(g_x)
                if res <= tol:
                    fv = value(x) if value is not None else math.nan
                    return SolveResult(x, fv, res, k, True)
                gn = res
        else:
            res = L * _norm(d)
            if res <= tol:
                fv = value(x) if value is not None else math.nan
                return SolveResult(x, fv, res, k, True)
            gn = res

        if gn < best.grad_norm:
            best = SolveResult(x, math.nan, gn, k, False)

    if value is not None and best.x is not None:
        best.value = value(best.x)
    return best
