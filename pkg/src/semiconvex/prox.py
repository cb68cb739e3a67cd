"""Resolvent maps of monotone gradient perturbations of the identity.

For convex f the set-valued map ``G(p) = p + grad f(p)`` is non-contractive
and surjective, so it has a single-valued inverse ``H`` with Lipschitz
constant 1 (a proximal map).  When f is additionally strongly convex in
the fiber variable with modulus sigma, the fiber component of H contracts
with the certified constant ``mu(sigma) < 1``.  H is computed as the
unique minimizer of the 1-strongly-convex objective

    phi(p) = (1/2)||p||^2 + f(p) - p . zeta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fields import CertificateError, ScalarField, numerical_gradient
from .solve import ConvergenceError, minimize_strongly_convex

__all__ = [
    "NonexpansiveReport",
    "ResolventSolveReport",
    "contraction_mu",
    "resolvent_base",
    "resolvent_full",
    "verify_nonexpansive",
]


@dataclass
class ResolventSolveReport:
    """Outcome of one resolvent evaluation H(zeta)."""

    solution: np.ndarray
    residual: float
    iterations: int
    converged: bool


def _require_convex(f: ScalarField, op: str):
    if f.kappa is None or f.kappa != 0.0:
        raise CertificateError(
            f"{op} requires a convexity certificate (kappa=0), got kappa={f.kappa}"
        )


def _solve_resolvent(f: ScalarField, zeta: np.ndarray, tol: float,
                     max_iter: int, x0: Optional[np.ndarray]) -> ResolventSolveReport:
    zeta = np.asarray(zeta, dtype=float)
    if zeta.size != f.dim:
        raise ValueError(f"zeta has dimension {zeta.size}, field has {f.dim}")
    fn = f.fn
    lipschitz = None

    if f.grad is not None:
        fgrad = f.grad

        def grad(p):
            return p + np.asarray(fgrad(p), dtype=float) - zeta
    else:
        # Central differences at a step fixed per solve.  For merely
        # Lipschitz f the smoothed gradient field is still monotone with a
        # certified curvature bound 1 + 2 Lip/h, which selects the
        # value-free constant-step mode (the smoothed values and the true
        # values disagree inside the stencil window, so a value-based line
        # search would stall there).
        h = 1e-5 * (1.0 + float(np.linalg.norm(zeta)))

        def grad(p):
            return p + numerical_gradient(fn, p, h) - zeta

        if f.lipschitz is not None:
            lipschitz = 1.0 + 2.0 * f.lipschitz / h

    def value(p):
        return 0.5 * float(p @ p) + fn(p) - float(p @ zeta)

    start = zeta if x0 is None else np.asarray(x0, dtype=float)
    res = minimize_strongly_convex(value, grad, start, strong_convexity=1.0,
                                   tol=tol, max_iter=max_iter,
                                   lipschitz=lipschitz)
    if not res.converged:
        raise ConvergenceError(
            f"resolvent solve did not reach tol={tol} "
            f"(residual {res.grad_norm:.3e} after {res.iterations} iterations)",
            res,
        )
    return ResolventSolveReport(res.x, res.grad_norm, res.iterations, True)


def resolvent_full(f: ScalarField, zeta, tol: float = 1e-9, *,
                   max_iter: int = 100_000,
                   x0: Optional[np.ndarray] = None) -> ResolventSolveReport:
    """Evaluate H(zeta), the inverse of G(p) = p + grad f(p), for convex f.

    The returned point satisfies ``||p + grad f(p) - zeta|| <= tol`` with
    the gradient taken from the field's certificate (analytic) or central
    differences.
    """
    _require_convex(f, "resolvent_full")
    return _solve_resolvent(f, zeta, tol, max_iter, x0)


def resolvent_base(g: ScalarField, u, tol: float = 1e-9, *,
                   max_iter: int = 100_000,
                   x0: Optional[np.ndarray] = None) -> ResolventSolveReport:
    """Evaluate H1(u), the base-space resolvent of a convex g."""
    _require_convex(g, "resolvent_base")
    return _solve_resolvent(g, u, tol, max_iter, x0)


def contraction_mu(sigma: float) -> float:
    """Certified fiber contraction constant mu(sigma) in (0, 1).

    mu = min( sqrt(1 + sigma^2), 1 + sigma / sqrt(1 + sigma^2) )^{-1},
    strictly below 1 for sigma > 0 and nonincreasing in sigma.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    root = math.sqrt(1.0 + sigma * sigma)
    return 1.0 / min(root, 1.0 + sigma / root)


@dataclass
class NonexpansiveReport:
    pairs: int
    mu: Optional[float]
    max_full_ratio: float
    max_fiber_ratio: Optional[float]
    full_ok: bool
    fiber_ok: Optional[bool]

    @property
    def passed(self) -> bool:
        return self.full_ok and (self.fiber_ok is not False)


def verify_nonexpansive(f: ScalarField, pairs: int, seed: int,
                        tol: float = 1e-7, *, solver_tol: float = 1e-11,
                        sample_radius: float = 3.0,
                        min_separation: float = 0.1,
                        max_separation: float = 2.0) -> NonexpansiveReport:
    """Sampled check that H is 1-Lipschitz and fiber-contracts at rate mu.

    Draws ``pairs`` seeded zeta pairs with separation in
    [min_separation, max_separation], evaluates H at both, and reports the
    worst ratios.  The full ratio must stay below 1 + tol; when the field
    carries a fiber strong-convexity certificate sigma, the fiber ratio
    must stay below mu(sigma) + tol.
    """
    _require_convex(f, "verify_nonexpansive")
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    rng = np.random.default_rng(seed)
    d = f.dim
    n = f.base_dim
    mu = contraction_mu(f.sigma) if (f.sigma and n is not None) else None

    max_full = 0.0
    max_fiber = 0.0 if mu is not None else None
    for _ in range(pairs):
        z1 = rng.uniform(-sample_radius, sample_radius, size=d)
        direction = rng.normal(size=d)
        direction /= np.linalg.norm(direction)
        sep = rng.uniform(min_separation, max_separation)
        z2 = z1 + sep * direction
        h1 = _solve_resolvent(f, z1, solver_tol, 100_000, None)
        h2 = _solve_resolvent(f, z2, solver_tol, 100_000, h1.solution)
        dz = float(np.linalg.norm(z2 - z1))
        dh = float(np.linalg.norm(h2.solution - h1.solution))
        max_full = max(max_full, dh / dz)
        if max_fiber is not None:
            dfib = float(np.linalg.norm(h2.solution[n:] - h1.solution[n:]))
            max_fiber = max(max_fiber, dfib / dz)

    full_ok = max_full <= 1.0 + tol
    fiber_ok = None if max_fiber is None else (max_fiber <= mu + tol)
    return NonexpansiveReport(pairs, mu, max_full, max_fiber, full_ok, fiber_ok)
