"""Scalar fields on box domains, with regularity certificates.

A :class:`ScalarField` wraps a black-box evaluable function together with
the constants that downstream solvers rely on: semiconvexity of the base
part, strong convexity along the fiber, fibrewise semiconcavity, and a
sup-norm bound on the working box.  Certificates are claims made by the
constructor of the field; :func:`validate_certificates` spot-checks them
with sampled second differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Box",
    "CertificateError",
    "CertificateReport",
    "DomainError",
    "ScalarField",
    "numerical_gradient",
    "validate_certificates",
]


class CertificateError(ValueError):
    """A claimed regularity certificate failed validation."""


class DomainError(ValueError):
    """Evaluation or stencil requested outside the field's box."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lower_i, upper_i]`` in each coordinate."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if np.any(hi <= lo):
            raise ValueError("box must have positive width in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, point: np.ndarray, margin: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        if p.shape != self.lower.shape:
            return False
        return bool(
            np.all(p >= self.lower + margin) and np.all(p <= self.upper - margin)
        )

    def clip(self, point: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(point, dtype=float), self.lower, self.upper)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Uniform samples, shape (count, dim)."""
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))

    def sub(self, idx: slice) -> "Box":
        return Box(self.lower[idx], self.upper[idx])

    @staticmethod
    def cube(dim: int, radius: float, center: float = 0.0) -> "Box":
        c = np.full(dim, float(center))
        return Box(c - radius, c + radius)


def numerical_gradient(fn: Callable[[np.ndarray], float], p: np.ndarray,
                       h: Optional[float] = None) -> np.ndarray:
    """Central-difference gradient, step ``1e-5 * (1 + ||p||)`` by default."""
    p = np.asarray(p, dtype=float)
    if h is None:
        h = 1e-5 * (1.0 + float(np.linalg.norm(p)))
    g = np.empty(p.size)
    for i in range(p.size):
        e = np.zeros(p.size)
        e[i] = h
        g[i] = (fn(p + e) - fn(p - e)) / (2.0 * h)
    return g


@dataclass(frozen=True)
class ScalarField:
    """Evaluable function on a box, carrying regularity certificates.

    Certificates (all optional, ``None`` when not claimed):

    - ``kappa``: f(x,y) + (kappa/2)||x||^2 - (sigma/2)||y||^2 is convex,
      jointly with ``sigma``.  For base-only fields (no fiber structure)
      ``kappa`` alone asserts f + (kappa/2)||x||^2 convex.
    - ``sigma``: strong convexity modulus in the fiber variable; the map
      y -> f(x,y) - (sigma/2)||y||^2 is convex for each x.
    - ``kappa2``: fibrewise semiconcavity; y -> f(x,y) - (kappa2/2)||y||^2
      is concave for each x.
    - ``semiconcavity``: joint semiconcavity constant, f - (k/2)||z||^2
      concave in all variables.  Required by the sup-convolution stage.
    - ``sup_bound``: bound on sup |f| over the box.
    - ``lipschitz``: Lipschitz bound over the box.

    ``base_dim`` records the base/fiber split of a product-structured
    field; fields without product structure leave it ``None``.
    """

    dim: int
    box: Box
    fn: Callable[[np.ndarray], float]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    base_dim: Optional[int] = None
    kappa: Optional[float] = None
    sigma: Optional[float] = None
    kappa2: Optional[float] = None
    semiconcavity: Optional[float] = None
    sup_bound: Optional[float] = None
    lipschitz: Optional[float] = None
    fiber_convex: bool = False
    name: str = ""

    def __post_init__(self):
        if self.box.dim != self.dim:
            raise ValueError(
                f"box dimension {self.box.dim} != field dimension {self.dim}"
            )
        if self.base_dim is not None and not 0 < self.base_dim < self.dim:
            raise ValueError("base_dim must split the dimension into two parts")
        if self.kappa is not None and self.kappa < 0:
            raise ValueError("kappa certificate must be >= 0")
        if self.sigma is not None and self.sigma < 0:
            raise ValueError("sigma certificate must be >= 0")

    @property
    def fiber_dim(self) -> int:
        if self.base_dim is None:
            raise ValueError("field has no base/fiber split")
        return self.dim - self.base_dim

    def __call__(self, point) -> float:
        return float(self.fn(np.asarray(point, dtype=float)))

    def gradient(self, point, h: Optional[float] = None) -> np.ndarray:
        """Analytic gradient when available, central differences otherwise."""
        p = np.asarray(point, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(p), dtype=float)
        return numerical_gradient(self.fn, p, h)

    @property
    def has_analytic_gradient(self) -> bool:
        return self.grad is not None

    def with_certificates(self, **updates) -> "ScalarField":
        return replace(self, **updates)

    def fiber_box(self) -> Box:
        cached = self.__dict__.get("_fiber_box")
        if cached is None:
            cached = self.box.sub(slice(self.base_dim, self.dim))
            object.__setattr__(self, "_fiber_box", cached)
        return cached

    def base_box(self) -> Box:
        cached = self.__dict__.get("_base_box")
        if cached is None:
            cached = self.box.sub(slice(0, self.base_dim))
            object.__setattr__(self, "_base_box", cached)
        return cached

    def split_point(self, point: np.ndarray):
        p = np.asarray(point, dtype=float)
        return p[: self.base_dim], p[self.base_dim:]


@dataclass
class CertificateReport:
    """Worst sampled second differences per certificate, >= 0 means honest."""

    checked: dict = field(default_factory=dict)
    worst: dict = field(default_factory=dict)
    passed: bool = True

    def record(self, label: str, margin: float, tol: float):
        self.checked[label] = True
        self.worst[label] = margin
        if margin < -tol:
            self.passed = False


def _second_differences(fn, a, b, steps):
    """Second differences of fn along the segment [a, b], one per interior node."""
    ts = np.linspace(0.0, 1.0, steps + 1)
    vals = np.array([fn(a + t * (b - a)) for t in ts])
    return vals[:-2] - 2.0 * vals[1:-1] + vals[2:]


def validate_certificates(f: ScalarField, segments: int = 32, seed: int = 0,
                          tol: float = 1e-8, steps: int = 8,
                          raise_on_failure: bool = False) -> CertificateReport:
    """Spot-check the field's certificates with sampled second differences.

    Each claimed certificate is tested along ``segments`` seeded random
    segments inside the box (joint, base-only, or fiber-only segments as
    appropriate).  Tolerance is relative to the sampled value scale.
    """
    rng = np.random.default_rng(seed)
    rep = CertificateReport()
    ends = f.box.sample(rng, 2 * segments)
    pairs = [(ends[2 * i], ends[2 * i + 1]) for i in range(segments)]
    scale = 1.0 + max(abs(f(a)) for a, _ in pairs)
    rtol = tol * scale

    def run(label, g, pair_list, sign):
        worst = np.inf
        for a, b in pair_list:
            d2 = sign * _second_differences(g, a, b, steps)
            worst = min(worst, float(np.min(d2)))
        rep.record(label, worst, rtol)

    n = f.base_dim

    if f.kappa is not None and f.sigma is not None and n is not None:
        def joint(z):
            x, y = z[:n], z[n:]
            return f(z) + 0.5 * f.kappa * x @ x - 0.5 * f.sigma * y @ y
        run("joint_convexity", joint, pairs, +1.0)
    elif f.kappa is not None and n is None:
        def base(z):
            return f(z) + 0.5 * f.kappa * z @ z
        run("base_semiconvexity", base, pairs, +1.0)

    if n is not None:
        fiber_pairs = []
        for a, b in pairs:
            b2 = b.copy()
            b2[:n] = a[:n]
            fiber_pairs.append((a, b2))
        if f.sigma is not None:
            def fib_cvx(z):
                return f(z) - 0.5 * f.sigma * z[n:] @ z[n:]
            run("fiber_strong_convexity", fib_cvx, fiber_pairs, +1.0)
        elif f.fiber_convex:
            run("fiber_convexity", f, fiber_pairs, +1.0)
        if f.kappa2 is not None:
            def fib_ccv(z):
                return f(z) - 0.5 * f.kappa2 * z[n:] @ z[n:]
            run("fiber_semiconcavity", fib_ccv, fiber_pairs, -1.0)

    if f.semiconcavity is not None:
        def joint_ccv(z):
            return f(z) - 0.5 * f.semiconcavity * z @ z
        run("joint_semiconcavity", joint_ccv, pairs, -1.0)

    if f.sup_bound is not None:
        pts = f.box.sample(rng, 16 * segments)
        worst = float(f.sup_bound - max(abs(f(p)) for p in pts))
        rep.record("sup_bound", worst, rtol)

    if raise_on_failure and not rep.passed:
        bad = [k for k, v in rep.worst.items() if v < -rtol]
        raise CertificateError(f"certificate validation failed: {bad}")
    return rep
