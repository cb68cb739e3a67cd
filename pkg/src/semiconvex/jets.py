"""Second-order jets and the matrix algebra around them.

A 2-jet ``(r, p, A)`` collects a value, a gradient, and a symmetric
Hessian matrix.  This module provides the jet container types, the
graph-slice and fiber pullbacks used by product subequations, a
finite-difference jet estimator with a two-scale stability flag, and a
sampled upper-contact test.

Matrices are dense; the supported regime is dimension <= 16.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .fields import DomainError, ScalarField

__all__ = [
    "BlockSplit",
    "ContactCheck",
    "Jet2",
    "JetEstimate",
    "SymMatrix",
    "estimate_jet",
    "is_upper_contact_jet",
    "pullback_fiber",
    "pullback_slice",
]


@dataclass(frozen=True)
class SymMatrix:
    """Exactly symmetric dense matrix.

    The constructor symmetrizes via ``(a + a.T) / 2``, which makes the
    stored entries bitwise symmetric, so ``entries[i, j] == entries[j, i]``
    holds exactly.
    """

    a: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.a, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("SymMatrix requires a square matrix")
        arr = 0.5 * (arr + arr.T)
        arr.setflags(write=False)
        object.__setattr__(self, "a", arr)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @staticmethod
    def identity(n: int) -> "SymMatrix":
        return SymMatrix(np.eye(n))

    @staticmethod
    def zeros(n: int) -> "SymMatrix":
        return SymMatrix(np.zeros((n, n)))

    @staticmethod
    def diag(values) -> "SymMatrix":
        return SymMatrix(np.diag(np.asarray(values, dtype=float)))

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in nondecreasing order."""
        return np.linalg.eigvalsh(self.a)

    def trace(self) -> float:
        return float(np.trace(self.a))

    def min_eig(self) -> float:
        return float(self.eigenvalues()[0])

    def is_semipositive(self, tol: float = 0.0) -> bool:
        return self.min_eig() >= -tol

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.a))) if self.n else 0.0

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix(self.a + other.a)

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix(self.a - other.a)

    def scaled(self, t: float) -> "SymMatrix":
        return SymMatrix(t * self.a)

    def close_to(self, other: "SymMatrix", tol: float) -> bool:
        return (self - other).norm_inf() <= tol


@dataclass(frozen=True)
class Jet2:
    """Second-order jet: value ``r``, gradient ``p``, Hessian ``A``."""

    r: float
    p: np.ndarray
    A: SymMatrix

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(-1)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "r", float(self.r))
        if p.size != self.A.n:
            raise ValueError(
                f"gradient length {p.size} != Hessian dimension {self.A.n}"
            )

    @property
    def dim(self) -> int:
        return self.p.size

    def add(self, other: "Jet2") -> "Jet2":
        if other.dim != self.dim:
            raise ValueError("jet dimensions differ")
        return Jet2(self.r + other.r, self.p + other.p, self.A + other.A)

    def with_hessian_slack(self, slack: float) -> "Jet2":
        return Jet2(self.r, self.p, SymMatrix(self.A.a + slack * np.eye(self.dim)))


@dataclass(frozen=True)
class BlockSplit:
    """Base/fiber partition of a jet in dimension ``n + m``.

    Induces ``p = (p1, p2)`` and ``A = [[B, C], [C^T, D]]`` with ``B`` the
    n x n base block, ``D`` the m x m fiber block, and ``C`` n x m.
    """

    n: int
    m: int

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("both block dimensions must be positive")

    @property
    def dim(self) -> int:
        return self.n + self.m

    def check(self, jet: Jet2):
        if jet.dim != self.dim:
            raise ValueError(f"jet dimension {jet.dim} != split {self.n}+{self.m}")

    def blocks(self, jet: Jet2):
        """Return (p1, p2, B, C, D)."""
        self.check(jet)
        n = self.n
        a = jet.A.a
        return jet.p[:n], jet.p[n:], a[:n, :n], a[:n, n:], a[n:, n:]

    def assemble(self, r: float, p1, p2, B, C, D) -> Jet2:
        n, m = self.n, self.m
        p = np.concatenate([np.asarray(p1, float).reshape(n),
                            np.asarray(p2, float).reshape(m)])
        a = np.zeros((n + m, n + m))
        a[:n, :n] = B
        a[:n, n:] = C
        a[n:, :n] = np.asarray(C).T
        a[n:, n:] = D
        return Jet2(r, p, SymMatrix(a))


def pullback_slice(jet: Jet2, split: BlockSplit, Gamma) -> Jet2:
    """Pull a jet back along the graph slice x -> (x, Gamma x).

    Returns ``(r, p1 + Gamma^T p2, B + C Gamma + Gamma^T C^T + Gamma^T D Gamma)``.
    """
    G = np.asarray(Gamma, dtype=float)
    if G.shape != (split.m, split.n):
        raise ValueError(f"Gamma must be {split.m}x{split.n}, got {G.shape}")
    p1, p2, B, C, D = split.blocks(jet)
    CG = C @ G
    hess = B + CG + CG.T + G.T @ D @ G
    return Jet2(jet.r, p1 + G.T @ p2, SymMatrix(hess))


def pullback_fiber(jet: Jet2, split: BlockSplit) -> Jet2:
    """Restrict a jet to the fiber: ``(r, p2, D)``."""
    _, p2, _, _, D = split.blocks(jet)
    return Jet2(jet.r, p2, SymMatrix(D))


@dataclass
class JetEstimate:
    jet: Jet2
    stable: bool
    disagreement: float


FieldLike = Union[ScalarField, Callable[[np.ndarray], float]]


def _as_eval(f: FieldLike):
    if isinstance(f, ScalarField):
        return f.fn, f.grad, f.box
    return f, None, None


def _value_hessian(fn, x, h):
    d = x.size
    H = np.empty((d, d))
    f0 = fn(x)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        H[i, i] = (fn(x + ei) - 2.0 * f0 + fn(x - ei)) / (h * h)
        for j in range(i):
            ej = np.zeros(d)
            ej[j] = h
            H[i, j] = H[j, i] = (
                fn(x + ei + ej) - fn(x + ei - ej) - fn(x - ei + ej) + fn(x - ei - ej)
            ) / (4.0 * h * h)
    return H


def _grad_hessian(grad, x, h):
    d = x.size
    H = np.empty((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        H[:, i] = (np.asarray(grad(x + ei)) - np.asarray(grad(x - ei))) / (2.0 * h)
    return 0.5 * (H + H.T)


def estimate_jet(f: FieldLike, x, h: float, *,
                 stability_factor: float = 10.0) -> JetEstimate:
    """Central-difference 2-jet of ``f`` at ``x`` with step ``h``.

    The gradient uses central differences; the Hessian uses gradient
    differences when the field carries an analytic gradient, and the
    4-point cross stencil on values otherwise.  The stability flag goes
    down when the two-scale (h, h/2) Hessians disagree by more than
    ``stability_factor * h`` in the max-entry norm, which marks a likely
    non-twice-differentiable point.
    """
    x = np.asarray(x, dtype=float)
    if h <= 0:
        raise ValueError("step size must be positive")
    fn, grad, box = _as_eval(f)
    if box is not None and not box.contains(x, margin=2.0 * h):
        raise DomainError(f"point {x} lacks the 2h interior margin")

    r = fn(x)
    if grad is not None:
        p = np.asarray(grad(x), dtype=float)
        H = _grad_hessian(grad, x, h)
        H_half = _grad_hessian(grad, x, 0.5 * h)
    else:
        d = x.size
        p = np.empty(d)
        for i in range(d):
            ei = np.zeros(d)
            ei[i] = h
            p[i] = (fn(x + ei) - fn(x - ei)) / (2.0 * h)
        H = _value_hessian(fn, x, h)
        H_half = _value_hessian(fn, x, 0.5 * h)

    disagreement = float(np.max(np.abs(H - H_half))) if x.size else 0.0
    stable = disagreement <= stability_factor * h
    return JetEstimate(Jet2(r, p, SymMatrix(H)), stable, disagreement)


@dataclass
class ContactCheck:
    ok: bool
    counterexample: Optional[np.ndarray]
    violation: float


def _ring_points(x: np.ndarray, radius: float) -> list[np.ndarray]:
    d = x.size
    pts = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = radius
        pts.append(x + e)
        pts.append(x - e)
    inv = radius / np.sqrt(2.0)
    for i in range(d):
        for j in range(i):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    e = np.zeros(d)
                    e[i] = si * inv
                    e[j] = sj * inv
                    pts.append(x + e)
    return pts


def is_upper_contact_jet(f: FieldLike, x, p, A: SymMatrix, radius: float,
                         samples: int, seed: int = 0,
                         slack: Optional[float] = None) -> ContactCheck:
    """Sampled test that ``(p, A)`` is an upper contact jet of f at x.

    Checks ``f(y) <= f(x) + p.(y-x) + (1/2)(y-x)^T A (y-x)`` on a fixed
    ring pattern (2n axis points, 2n(n-1) diagonal points at the given
    radius) plus ``samples`` seeded uniform points in the ball.  Returns
    the first violating point when the inequality fails.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if radius <= 0:
        raise ValueError("radius must be positive")
    fn, _, box = _as_eval(f)
    if box is not None and not box.contains(x, margin=radius):
        raise DomainError("contact ball exits the field's box")

    fx = fn(x)
    if slack is None:
        slack = 1e-12 * (1.0 + abs(fx))
    pts = _ring_points(x, radius)
    rng = np.random.default_rng(seed)
    d = x.size
    for _ in range(samples):
        direction = rng.normal(size=d)
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            continue
        rad = radius * rng.uniform() ** (1.0 / d)
        pts.append(x + direction * (rad / norm))

    worst = 0.0
    for y in pts:
        dy = y - x
        model = fx + float(p @ dy) + 0.5 * float(dy @ A.a @ dy)
        gap = fn(y) - model
        if gap > slack:
            return ContactCheck(False, y, float(gap))
        worst = max(worst, float(gap))
    return ContactCheck(True, None, worst)
