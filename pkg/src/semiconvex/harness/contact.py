"""Contact quadratics: the upper touching surface built from a marginal jet.

Given the 2-jet of the marginal g at a base point, a slope estimate for
the argmin graph, a fibrewise semiconcavity constant, and a relaxation
epsilon, the contact quadratic

    q(x, y) = g(x0) + u.(x - x0) + (1/2)(x - x0)' Hg (x - x0)
              + (eps/2)||x - x0||^2 + kappa2 ||y - y0 - Gamma (x - x0)||^2

touches the field from above near (x0, y0).  Its jet has the block
Hessian [[Hg + eps I + 2 k Gamma'Gamma, -2 k Gamma'], [-2 k Gamma, 2 k I]]
and, by construction, pulling that jet back along the slope Gamma
recovers Hg + eps I exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..fields import Box, ScalarField
from ..jets import BlockSplit, Jet2, SymMatrix

__all__ = ["ContactQuadratic", "build_contact_quadratic"]


@dataclass
class ContactQuadratic:
    field: ScalarField
    jet: Jet2
    x0: np.ndarray
    y0: np.ndarray
    Gamma: np.ndarray
    kappa2: float
    epsilon: float

    @property
    def split(self) -> BlockSplit:
        return BlockSplit(self.x0.size, self.y0.size)


def build_contact_quadratic(g_jet: Jet2, x0, y0, Gamma, kappa2: float,
                            epsilon: float,
                            box: Box | None = None) -> ContactQuadratic:
    """Evaluable contact quadratic and its jet at (x0, y0)."""
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    G = np.asarray(Gamma, dtype=float)
    n, m = x0.size, y0.size
    if g_jet.dim != n:
        raise ValueError(f"marginal jet dimension {g_jet.dim} != base dimension {n}")
    if G.shape != (m, n):
        raise ValueError(f"Gamma must be {m}x{n}, got {G.shape}")
    k = float(kappa2)
    eps = float(epsilon)
    r, u, Hg = g_jet.r, g_jet.p, g_jet.A.a

    def fn(z):
        dx = z[:n] - x0
        dy = z[n:] - y0 - G @ dx
        return (r + float(u @ dx) + 0.5 * float(dx @ Hg @ dx)
                + 0.5 * eps * float(dx @ dx) + k * float(dy @ dy))

    def grad(z):
        dx = z[:n] - x0
        dy = z[n:] - y0 - G @ dx
        gx = u + Hg @ dx + eps * dx - 2.0 * k * (G.T @ dy)
        gy = 2.0 * k * dy
        return np.concatenate([gx, gy])

    hess = np.zeros((n + m, n + m))
    hess[:n, :n] = Hg + eps * np.eye(n) + 2.0 * k * (G.T @ G)
    hess[:n, n:] = -2.0 * k * G.T
    hess[n:, :n] = -2.0 * k * G
    hess[n:, n:] = 2.0 * k * np.eye(m)
    jet = Jet2(r, np.concatenate([u, np.zeros(m)]), SymMatrix(hess))

    if box is None:
        reach = 10.0 * (1.0 + float(np.max(np.abs(np.concatenate([x0, y0])))))
        box = Box.cube(n + m, reach)
    field = ScalarField(dim=n + m, box=box, fn=fn, grad=grad, base_dim=n,
                        name="contact-quadratic")
    return ContactQuadratic(field, jet, x0, y0, G, k, eps)
