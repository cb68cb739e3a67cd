"""Shared field builders and closed-form oracles for the test suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import pytest

from semiconvex.fields import Box, ScalarField


def coupled_quadratic(sigma: float) -> ScalarField:
    """f(x, y) = (x - y)^2 / 2 + (sigma/2) y^2; gamma(x) = x/(1+sigma)."""
    def fn(z):
        x, y = z
        return 0.5 * (x - y) ** 2 + 0.5 * sigma * y * y

    def grad(z):
        x, y = z
        return np.array([x - y, y - x + sigma * y])

    return ScalarField(dim=2, box=Box.cube(2, 10.0), fn=fn, grad=grad,
                       base_dim=1, kappa=0.0, sigma=sigma,
                       kappa2=1.0 + sigma, fiber_convex=True,
                       name=f"coupled({sigma})")


def worked_marginal() -> ScalarField:
    """Closed-form marginal of coupled_quadratic(1): g(x) = x^2 / 4."""
    return ScalarField(dim=1, box=Box.cube(1, 10.0),
                       fn=lambda z: 0.25 * float(z @ z),
                       grad=lambda z: 0.5 * np.asarray(z, float),
                       kappa=0.0, name="x^2/4")


@dataclass
class QuadraticOracle:
    """Random convex quadratic with every argmin quantity in closed form."""

    field: ScalarField
    marginal: ScalarField
    gamma: Callable[[np.ndarray], np.ndarray]
    grad_g: Callable[[np.ndarray], np.ndarray]
    n: int
    m: int
    sigma: float
    schur: np.ndarray


def random_convex_quadratic(seed: int, max_dim: int = 3) -> QuadraticOracle:
    """Seeded f(z) = 0.5 z'Az + b.z with A = G'G + diag(0, sigma I) >= 0.

    gamma(x) = -D^{-1}(C'x + b_y) and g is quadratic with Hessian the Schur
    complement; both come from exact linear algebra, no optimization.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_dim + 1))
    m = int(rng.integers(1, max_dim + 1))
    d = n + m
    G = 0.6 * rng.normal(size=(d, d))
    sigma = float(rng.uniform(0.4, 1.5))
    A = G.T @ G
    A[n:, n:] += sigma * np.eye(m)
    b = 0.5 * rng.normal(size=d)
    B, C, D = A[:n, :n], A[:n, n:], A[n:, n:]
    b_x, b_y = b[:n], b[n:]
    S = B - C @ np.linalg.solve(D, C.T)

    def fn(z):
        return 0.5 * float(z @ A @ z) + float(b @ z)

    def grad(z):
        return A @ z + b

    field = ScalarField(dim=d, box=Box.cube(d, 10.0), fn=fn, grad=grad,
                        base_dim=n, kappa=0.0, sigma=sigma,
                        kappa2=float(np.linalg.eigvalsh(D)[-1]),
                        fiber_convex=True, name=f"quadratic(seed={seed})")

    def gamma(x):
        return -np.linalg.solve(D, C.T @ np.asarray(x, float) + b_y)

    def g_fn(x):
        x = np.asarray(x, float)
        return fn(np.concatenate([x, gamma(x)]))

    def grad_g(x):
        x = np.asarray(x, float)
        return B @ x + C @ gamma(x) + b_x

    marginal = ScalarField(dim=n, box=Box.cube(n, 10.0), fn=g_fn, grad=grad_g,
                           kappa=0.0, name=f"marginal(seed={seed})")
    return QuadraticOracle(field, marginal, gamma, grad_g, n, m, sigma, S)


def kinked_argmin_family() -> ScalarField:
    """f(x, y) = (y - |x|)^2 + y^2/2; gamma(x) = 2|x|/3."""
    def fn(z):
        x, y = z
        return (y - abs(x)) ** 2 + 0.5 * y * y

    def grad(z):
        x, y = z
        s = np.sign(x)
        return np.array([-2.0 * s * (y - abs(x)), 2.0 * (y - abs(x)) + y])

    return ScalarField(dim=2, box=Box.cube(2, 4.0), fn=fn, grad=grad,
                       base_dim=1, sigma=3.0, kappa2=3.0, fiber_convex=True,
                       name="kinked")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
