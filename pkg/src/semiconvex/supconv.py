"""Partial sup-convolution in the base variable.

The partial sup-convolution of a bounded field replaces f(x, y) by the
supremum of ``f(z, y) - ||z - x||^2 / (2 eps)`` over z.  Because f is
bounded by M on its box, the supremum localizes to ``||z - x|| < delta``
with ``delta = 2 sqrt(eps M)``, so evaluation is a small box-constrained
concave maximization.  The construction trades regularity certificates:

- the base direction becomes 1/eps-semiconvex (for fiber-convex sources),
- fibrewise semiconcavity of the source is preserved when eps < 1/kappa,
- values increase toward f from above as eps decreases.

Adding ``(eps/2)||y||^2`` on top yields the strongly-convex-in-fiber
approximant used by the verification pipeline.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .fields import CertificateError, DomainError, ScalarField
from .solve import minimize_strongly_convex

__all__ = [
    "FiberSemiconcavityReport",
    "SupConvEvaluation",
    "SupConvField",
    "SupConvPropertyReport",
    "add_fiber_quadratic",
    "build_f_epsilon",
    "partial_sup_convolve",
    "verify_fiber_semiconcavity",
    "verify_supconv_properties",
]


@dataclass
class SupConvEvaluation:
    value: float
    tau: np.ndarray
    tau_norm: float
    iterations: int
    interior: bool


class SupConvField:
    """Lazily evaluated partial sup-convolution of a bounded source field.

    Values are memoized per exact query point (grid sweeps re-query the
    same lattice points heavily); off-cache queries are re-solved exactly.
    The memo is guarded by a lock so read-heavy parallel use is safe.
    """

    def __init__(self, source: ScalarField, epsilon: float,
                 inner_tol: float = 1e-10, max_iter: int = 100_000):
        if source.base_dim is None:
            raise ValueError("partial sup-convolution needs a product-structured field")
        if source.sup_bound is None:
            raise CertificateError("source field must carry a sup-norm bound M")
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if source.semiconcavity is None:
            raise CertificateError(
                "source field must carry a joint semiconcavity certificate "
                "(the inner ascent needs a certified concavity modulus)")
        kappa_sc = float(source.semiconcavity)
        if kappa_sc > 0 and epsilon >= 1.0 / kappa_sc:
            raise ValueError(
                f"epsilon={epsilon} must be below 1/semiconcavity={1.0 / kappa_sc}")
        self.source = source
        self.epsilon = float(epsilon)
        self.delta = 2.0 * np.sqrt(epsilon * source.sup_bound)
        self.inner_tol = float(inner_tol)
        self.max_iter = max_iter
        self.modulus = 1.0 / self.epsilon - kappa_sc
        # Upper curvature of the negated inner objective is 1/eps plus a
        # lower curvature bound on the source, which the semiconvexity
        # certificate kappa provides; without it the solver backtracks.
        self.curvature_bound = (1.0 / self.epsilon + source.kappa
                                if source.kappa is not None else None)
        self._base_lo = source.base_box().lower
        self._base_hi = source.base_box().upper
        self._memo: dict = {}
        self._details: dict = {}
        self._lock = threading.Lock()
        self._warm: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.source.base_dim

    def in_shrunken_domain(self, x) -> bool:
        """True when the delta-ball around x stays inside the base box."""
        return self.source.base_box().contains(np.asarray(x, float),
                                               margin=self.delta)

    def _inner_bounds(self, x: np.ndarray):
        base = self.source.base_box()
        lo = np.maximum(-self.delta, base.lower - x)
        hi = np.minimum(self.delta, base.upper - x)
        return lo, hi

    def evaluate_detail(self, point) -> SupConvEvaluation:
        """Solve the inner maximization and report the maximizer.

        Details are cached per exact query point, so a value query followed
        by a gradient query at the same point costs one inner solve.
        """
        p = np.asarray(point, dtype=float)
        key = p.tobytes()
        with self._lock:
            hit = self._details.get(key)
        if hit is not None:
            return hit
        n = self.n
        x, y = p[:n], p[n:]
        if np.any(x < self._base_lo) or np.any(x > self._base_hi):
            raise DomainError(f"base point {x} outside the source box")
        lo = np.maximum(-self.delta, self._base_lo - x)
        hi = np.minimum(self.delta, self._base_hi - x)
        eps = self.epsilon
        fn = self.source.fn

        def neg_obj(tau):
            return 0.5 * float(tau @ tau) / eps - fn(np.concatenate([x + tau, y]))

        if self.source.grad is not None:
            sgrad = self.source.grad

            def neg_grad(tau):
                g = np.asarray(sgrad(np.concatenate([x + tau, y])), float)
                return tau / eps - g[:n]
        else:
            def neg_grad(tau):
                g = np.empty(n)
                h = 1e-6
                for i in range(n):
                    e = np.zeros(n)
                    e[i] = h
                    g[i] = (neg_obj(tau + e) - neg_obj(tau - e)) / (2 * h)
                return g

        def project(tau):
            return np.minimum(hi, np.maximum(lo, tau))

        # The shifted objective is strongly concave, so one ascent from a
        # good start finds the unique maximizer.  Cold queries score the
        # candidate pattern (cube center plus 2n axis points); warm queries
        # continue from the previous maximizer.
        if self._warm is not None:
            start = project(self._warm)
        else:
            starts = [project(np.zeros(n))]
            for i in range(n):
                for s in (1.0, -1.0):
                    e = np.zeros(n)
                    e[i] = 0.5 * s * self.delta
                    starts.append(project(e))
            start = min(starts, key=neg_obj)

        res = minimize_strongly_convex(
            neg_obj if self.curvature_bound is None else None,
            neg_grad, start, strong_convexity=self.modulus,
            tol=self.inner_tol, max_iter=self.max_iter,
            l0=1.0 / eps + abs(float(self.source.semiconcavity)) + 1.0,
            lipschitz=self.curvature_bound, project=project)
        self._warm = res.x
        tau_norm = float(np.linalg.norm(res.x))
        value = -neg_obj(res.x)
        detail = SupConvEvaluation(value, res.x, tau_norm, res.iterations,
                                   tau_norm < self.delta)
        with self._lock:
            if len(self._details) > 64:
                self._details.clear()
            self._details[key] = detail
            self._memo[key] = value
        return detail

    def evaluate(self, point) -> float:
        p = np.asarray(point, dtype=float)
        key = p.tobytes()
        with self._lock:
            if key in self._memo:
                return self._memo[key]
        return self.evaluate_detail(p).value

    def gradient(self, point) -> np.ndarray:
        """Envelope gradient: base part tau*/eps, fiber part grad_y f at z*."""
        p = np.asarray(point, dtype=float)
        n = self.n
        detail = self.evaluate_detail(p)
        z = np.concatenate([p[:n] + detail.tau, p[n:]])
        if self.source.grad is not None:
            gy = np.asarray(self.source.grad(z), float)[n:]
        else:
            def fiber_slice(y):
                return self.source.fn(np.concatenate([z[:n], y]))
            from .fields import numerical_gradient
            gy = numerical_gradient(fiber_slice, p[n:])
        return np.concatenate([detail.tau / self.epsilon, gy])

    def as_field(self) -> ScalarField:
        src = self.source
        kappa = (1.0 / self.epsilon) if src.fiber_convex else None
        sigma = 0.0 if src.fiber_convex else None
        return ScalarField(
            dim=src.dim, box=src.box, fn=self.evaluate, grad=self.gradient,
            base_dim=src.base_dim, kappa=kappa, sigma=sigma,
            kappa2=src.semiconcavity, sup_bound=src.sup_bound,
            fiber_convex=src.fiber_convex,
            name=f"supconv(eps={self.epsilon}, {src.name})",
        )


def partial_sup_convolve(f: ScalarField, epsilon: float,
                         inner_tol: float = 1e-10) -> SupConvField:
    """Partial sup-convolution of a bounded field; see :class:`SupConvField`."""
    return SupConvField(f, epsilon, inner_tol)


def add_fiber_quadratic(f: ScalarField, coef: float) -> ScalarField:
    """f(x, y) + (coef/2)||y||^2 with certificates updated accordingly."""
    if f.base_dim is None:
        raise ValueError("fiber quadratic needs a product-structured field")
    n = f.base_dim
    fn = f.fn

    def shifted(z):
        yy = z[n:]
        return fn(z) + 0.5 * coef * float(yy @ yy)

    grad = None
    if f.grad is not None:
        fgrad = f.grad

        def grad(z):
            g = np.asarray(fgrad(z), float).copy()
            g[n:] += coef * z[n:]
            return g

    fiber = f.fiber_box()
    reach = float(np.max(np.sum(np.stack([fiber.lower, fiber.upper]) ** 2,
                                axis=1))) if coef else 0.0
    return f.with_certificates(
        fn=shifted, grad=grad,
        sigma=None if f.sigma is None else f.sigma + coef,
        kappa2=None if f.kappa2 is None else f.kappa2 + coef,
        semiconcavity=None if f.semiconcavity is None else f.semiconcavity + coef,
        sup_bound=None if f.sup_bound is None else f.sup_bound + 0.5 * coef * reach,
        name=f"{f.name}+{coef}/2|y|^2" if f.name else f"+{coef}/2|y|^2",
    )


def build_f_epsilon(f: ScalarField, epsilon: float,
                    inner_tol: float = 1e-10) -> ScalarField:
    """The approximant f_eps = f^{eps,p} + (eps/2)||y||^2.

    Requires a semiconcave, fiber-convex source and eps < 1/kappa.  The
    result carries base semiconvexity 1/eps, fiber strong convexity eps,
    and fiber semiconcavity kappa + eps (a certified over-approximation).
    """
    if not f.fiber_convex:
        raise CertificateError("build_f_epsilon needs a fiber-convex source")
    if f.semiconcavity is None:
        raise CertificateError("build_f_epsilon needs a semiconcavity certificate")
    if f.semiconcavity > 0 and epsilon >= 1.0 / f.semiconcavity:
        raise ValueError(
            f"epsilon={epsilon} >= 1/kappa={1.0 / f.semiconcavity}")
    sc = partial_sup_convolve(f, epsilon, inner_tol)
    out = add_fiber_quadratic(sc.as_field(), epsilon)
    # Fiber strong convexity of the source passes through the supremum over
    # the base shift (the ||y||^2 term is independent of z), so sigma may be
    # sharpened from eps to source-sigma + eps.
    return out.with_certificates(
        kappa=1.0 / epsilon, sigma=(f.sigma or 0.0) + epsilon,
        kappa2=f.semiconcavity + epsilon,
        name=f"f_eps({epsilon}, {f.name})" if f.name else f"f_eps({epsilon})",
    )


@dataclass
class SupConvPropertyReport:
    epsilons: List[float]
    monotonicity_worst: float
    convexity_worst: Optional[float]
    gaps: List[float]
    gap_monotone_worst: float
    tol: float

    @property
    def passed(self) -> bool:
        ok = self.monotonicity_worst >= -self.tol
        ok = ok and self.gap_monotone_worst >= -self.tol
        if self.convexity_worst is not None:
            ok = ok and self.convexity_worst >= -self.tol
        return ok


def verify_supconv_properties(f: ScalarField, epsilons, grid,
                              tol: float = 1e-8, *, segments: int = 16,
                              seed: int = 0) -> SupConvPropertyReport:
    """Check ordering, strong semiconvexity, and convergence on a grid.

    ``epsilons`` must be strictly decreasing.  Ordering means
    f <= f^{eps'} <= f^{eps} pointwise for eps' <= eps; strong
    semiconvexity tests second differences of f^{eps} + ||x||^2/(2 eps)
    along seeded segments (fiber-convex sources only); convergence checks
    that the gap to f shrinks monotonically along the list.
    """
    eps = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilon list must be strictly decreasing")
    convs = [partial_sup_convolve(f, e) for e in eps]
    pts = [np.asarray(p, float) for p in grid]

    mono_worst = np.inf
    gaps = [0.0] * len(eps)
    for p in pts:
        fv = f(p)
        vals = [c.evaluate(p) for c in convs]
        chain = vals + [fv]  # decreasing epsilon, then f itself
        for hi, lo in zip(chain, chain[1:]):
            mono_worst = min(mono_worst, hi - lo)
        for i, v in enumerate(vals):
            gaps[i] = max(gaps[i], v - fv)
    gap_mono = min((g_large - g_small for g_large, g_small
                    in zip(gaps, gaps[1:])), default=0.0)

    conv_worst = None
    if f.fiber_convex:
        rng = np.random.default_rng(seed)
        n = f.base_dim
        conv_worst = np.inf
        ends = np.asarray([rng.uniform(f.box.lower, f.box.upper)
                           for _ in range(2 * segments)])
        for c in convs:
            inner = [p for p in ends if c.in_shrunken_domain(p[:n])] or list(ends)
            def shifted(z, c=c):
                return c.evaluate(z) + 0.5 * float(z[:n] @ z[:n]) / c.epsilon
            for i in range(0, len(inner) - 1, 2):
                a, b = inner[i], inner[i + 1]
                midv = shifted(0.5 * (a + b))
                conv_worst = min(conv_worst,
                                 shifted(a) - 2.0 * midv + shifted(b))
        conv_worst = float(conv_worst)

    return SupConvPropertyReport(eps, float(mono_worst), conv_worst,
                                 gaps, float(gap_mono), tol)


@dataclass
class FiberSemiconcavityReport:
    worst: float
    witness: Optional[np.ndarray]
    tol: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol


def verify_fiber_semiconcavity(field, kappa2: float, grid, tol: float = 1e-8,
                               *, seed: int = 0, steps=(0.05, 0.2)) -> FiberSemiconcavityReport:
    """Fiber second differences of field - (kappa2/2)||y||^2 must be <= tol.

    ``field`` may be a ScalarField or a SupConvField; ``grid`` supplies
    (x, y) center points and seeded fiber directions/steps build triples
    around each.
    """
    if isinstance(field, SupConvField):
        evaluate = field.evaluate
        n = field.n
        dim = field.source.dim
    else:
        evaluate = field.fn
        n = field.base_dim
        dim = field.dim
    if n is None:
        raise ValueError("fiber semiconcavity needs a product-structured field")

    def shifted(z):
        yy = z[n:]
        return evaluate(z) - 0.5 * kappa2 * float(yy @ yy)

    rng = np.random.default_rng(seed)
    worst = -np.inf
    witness = None
    m = dim - n
    for p in grid:
        p = np.asarray(p, dtype=float)
        for t in steps:
            d = rng.normal(size=m)
            d *= t / np.linalg.norm(d)
            step = np.concatenate([np.zeros(n), d])
            sd = shifted(p + step) - 2.0 * shifted(p) + shifted(p - step)
            if sd > worst:
                worst, witness = float(sd), p
    return FiberSemiconcavityReport(worst, witness, tol)
