"""Argmin maps, marginal functions, and the resolvent functional equation.

Given a product-structured field f(x, y) that is strongly convex along
the fiber, the argmin map ``gamma(x)`` and marginal ``g(x) = min_y f(x,y)``
are computed by strongly convex minimization.  For convex f the argmin
satisfies the functional equation

    J(x, u, y) = y - pi2 H(H1(x + u) + u, y) = 0     for u in the
    subdifferential of g at x and y = gamma(x),

whose right-hand map is a mu-contraction in y.  That gives both a
verification residual and a constructive fixed-point solver whose
per-iteration contraction ratio is certified by mu(sigma).  Calmness and
differentiability diagnostics for gamma round out the module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .fields import CertificateError, DomainError, ScalarField, numerical_gradient
from .prox import ResolventSolveReport, contraction_mu, resolvent_base, resolvent_full
from .solve import ConvergenceError, minimize_strongly_convex

__all__ = [
    "ArgminResult",
    "CalmnessReport",
    "ContractionViolation",
    "FixedPointResult",
    "FunctionalEquationReport",
    "SupportVector",
    "TildeShift",
    "calmness_scan",
    "functional_J",
    "marginal_field",
    "solve_argmin",
    "solve_J_fixed_point",
    "subdifferential_probe",
    "tilde_shift",
    "verify_functional_equation",
]


class ContractionViolation(RuntimeError):
    """Observed contraction ratio exceeded the certified mu(sigma)."""


@dataclass
class ArgminResult:
    x: np.ndarray
    gamma: np.ndarray
    g_value: float
    report: ResolventSolveReport


def _fiber_problem(f: ScalarField, x: np.ndarray):
    n = f.base_dim
    fn = f.fn

    def value(y):
        return fn(np.concatenate([x, y]))

    if f.grad is not None:
        fgrad = f.grad

        def grad(y):
            return np.asarray(fgrad(np.concatenate([x, y])), dtype=float)[n:]
    else:
        def grad(y):
            return numerical_gradient(value, y)

    return value, grad


def solve_argmin(f: ScalarField, x, tol: float = 1e-9, *,
                 y0: Optional[np.ndarray] = None, max_iter: int = 100_000,
                 boundary_margin: Optional[float] = None) -> ArgminResult:
    """Unique fiber minimizer gamma(x) and marginal value g(x).

    Requires a positive fiber strong-convexity certificate sigma.  The
    minimizer must land in the interior of the fiber box; results within
    ``boundary_margin`` of the edge are rejected, since the machinery
    assumes an attained interior minimum.
    """
    if f.base_dim is None:
        raise ValueError("solve_argmin needs a product-structured field")
    if not f.sigma or f.sigma <= 0:
        raise CertificateError("solve_argmin requires a sigma certificate > 0")
    x = np.asarray(x, dtype=float)
    if x.size != f.base_dim:
        raise ValueError(f"base point has dimension {x.size}, expected {f.base_dim}")

    fiber_box = f.fiber_box()
    if boundary_margin is None:
        boundary_margin = 1e-6 * float(np.min(fiber_box.width))
    start = fiber_box.center if y0 is None else np.asarray(y0, dtype=float)

    value, grad = _fiber_problem(f, x)
    # The fibrewise semiconcavity constant, when certified, is an upper
    # curvature bound along the fiber, which enables the value-free
    # constant-step mode of the solver.
    lip = f.kappa2 if (f.kappa2 is not None and f.grad is not None) else None
    res = minimize_strongly_convex(value, grad, start,
                                   strong_convexity=f.sigma, tol=tol,
                                   max_iter=max_iter, lipschitz=lip)
    if not res.converged:
        raise ConvergenceError(
            f"argmin solve did not reach tol={tol} at x={x}", res)
    if not fiber_box.contains(res.x, margin=boundary_margin):
        raise DomainError(
            f"fiber minimizer {res.x} within margin {boundary_margin} of the "
            "fiber box boundary; interior minimum assumption violated")
    report = ResolventSolveReport(res.x, res.grad_norm, res.iterations, True)
    return ArgminResult(x, res.x, res.value, report)


def marginal_field(f: ScalarField, tol: float = 1e-10, *,
                   warm: bool = True, gamma_cache: Optional[dict] = None,
                   boundary_margin: Optional[float] = None) -> ScalarField:
    """Marginal g(x) = min_y f(x, y) as an evaluable base field.

    Evaluation runs one argmin solve; the gradient uses the envelope
    identity grad g(x) = grad_x f(x, gamma(x)).  The marginal inherits the
    base semiconvexity certificate kappa.  Consecutive evaluations warm
    start from the previous minimizer.  Pass ``gamma_cache`` (a dict) to
    share the solved argmin results with the caller, keyed by the base
    point's byte representation.
    """
    if f.base_dim is None:
        raise ValueError("marginal_field needs a product-structured field")
    n = f.base_dim
    state = {"y": None}

    def _gamma(x):
        if gamma_cache is not None:
            hit = gamma_cache.get(x.tobytes())
            if hit is not None:
                return hit
        y0 = state["y"] if warm else None
        try:
            res = solve_argmin(f, x, tol, y0=y0, boundary_margin=boundary_margin)
        except ConvergenceError:
            res = solve_argmin(f, x, tol, boundary_margin=boundary_margin)
        state["y"] = res.gamma
        if gamma_cache is not None:
            if len(gamma_cache) > 512:
                gamma_cache.clear()
            gamma_cache[x.tobytes()] = res
        return res

    def fn(x):
        return _gamma(np.asarray(x, dtype=float)).g_value

    def grad(x):
        x = np.asarray(x, dtype=float)
        res = _gamma(x)
        z = np.concatenate([x, res.gamma])
        if f.grad is not None:
            return np.asarray(f.grad(z), dtype=float)[:n]
        def base_slice(xx):
            return f.fn(np.concatenate([xx, res.gamma]))
        return numerical_gradient(base_slice, x)

    return ScalarField(
        dim=n, box=f.base_box(), fn=fn, grad=grad, kappa=f.kappa,
        name=f"marginal({f.name})" if f.name else "marginal",
    )


def functional_J(f: ScalarField, g: ScalarField, x, u, y,
                 tol: float = 1e-9) -> np.ndarray:
    """Residual J(x, u, y) = y - pi2 H(H1(x + u) + u, y).

    f must be convex with product structure; g is its marginal (or a
    closed-form stand-in).  Both resolvents are solved to ``tol``.
    """
    if f.base_dim is None:
        raise ValueError("functional_J needs a product-structured field")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    n = f.base_dim
    h1 = resolvent_base(g, x + u, tol)
    zeta = np.concatenate([h1.solution + u, y])
    h = resolvent_full(f, zeta, tol)
    return y - h.solution[n:]


@dataclass
class FunctionalEquationReport:
    residuals: List[float]
    max_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol


def verify_functional_equation(f: ScalarField, xs, tol: float = 1e-6, *,
                               g_field: Optional[ScalarField] = None,
                               solver_tol: float = 1e-10) -> FunctionalEquationReport:
    """Check J(x, grad g, gamma(x)) = 0 over a grid of base points.

    The support vector u comes from :func:`subdifferential_probe` on the
    marginal; pass ``g_field`` to use a closed-form marginal instead of
    the numerically derived one.
    """
    g = marginal_field(f, solver_tol) if g_field is None else g_field
    residuals = []
    for x in xs:
        x = np.asarray(x, dtype=float)
        sv = subdifferential_probe(g, x, g.kappa if g.kappa is not None else 0.0)
        gamma = solve_argmin(f, x, solver_tol).gamma
        r = functional_J(f, g, x, sv.u, gamma, solver_tol)
        residuals.append(float(np.linalg.norm(r)))
    return FunctionalEquationReport(residuals, max(residuals), tol)


@dataclass
class FixedPointResult:
    y: np.ndarray
    residual: float
    iterations: int
    ratios: List[float]
    converged: bool


def solve_J_fixed_point(f: ScalarField, g: ScalarField, x, u, y0,
                        tol: float = 1e-9, max_iter: int = 500, *,
                        solver_tol: float = 1e-11, ratio_tol: float = 1e-6,
                        ratio_floor: float = 1e-4) -> FixedPointResult:
    """Solve J(x, u, y) = 0 by iterating y <- pi2 H(H1(x+u) + u, y).

    The iteration map is a mu(sigma)-contraction in y, so plain damping-free
    Banach iteration converges linearly; per-iteration step ratios are
    logged (while the previous step exceeds ``ratio_floor``, which keeps
    solver noise out of the ratio estimates) and checked against
    mu(sigma) + ratio_tol when a sigma certificate is present.
    """
    if f.base_dim is None:
        raise ValueError("solve_J_fixed_point needs a product-structured field")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    y = np.asarray(y0, dtype=float).copy()
    n = f.base_dim
    mu = contraction_mu(f.sigma) if f.sigma else None

    h1 = resolvent_base(g, x + u, solver_tol)
    v = h1.solution + u

    ratios: List[float] = []
    prev_step = None
    warm = None
    for k in range(max_iter + 1):
        h = resolvent_full(f, np.concatenate([v, y]), solver_tol, x0=warm)
        warm = h.solution
        y_next = h.solution[n:]
        step = float(np.linalg.norm(y_next - y))
        if prev_step is not None and prev_step >= ratio_floor:
            ratio = step / prev_step
            ratios.append(ratio)
            if mu is not None and ratio > mu + ratio_tol:
                raise ContractionViolation(
                    f"observed ratio {ratio:.6f} exceeds mu={mu:.6f}+{ratio_tol}; "
                    "sigma certificate suspect")
        if step <= tol:
            # residual of J at y_next is bounded by mu * step <= step
            return FixedPointResult(y_next, step, k, ratios, True)
        prev_step = step
        y = y_next
    raise ConvergenceError(
        f"fixed-point iteration exceeded {max_iter} steps (last step {step:.3e})",
        None)


@dataclass
class TildeShift:
    """Convexified field f~(x,y) = f(x,y) + (kappa/2)||x||^2 with the
    affine support-vector reindexing between g and g~."""

    field: ScalarField
    kappa: float

    def support_to_tilde(self, u, x) -> np.ndarray:
        """u in the kappa-relaxed subdifferential of g  ->  u~ in grad g~."""
        return np.asarray(u, float) + self.kappa * np.asarray(x, float)

    def support_from_tilde(self, u_tilde, x) -> np.ndarray:
        """u~ in grad g~  ->  u = u~ - kappa x."""
        return np.asarray(u_tilde, float) - self.kappa * np.asarray(x, float)


def tilde_shift(f: ScalarField) -> TildeShift:
    """Shift a kappa-semiconvex field to a convex one; argmin is unchanged.

    Adding a function of x alone moves neither the fiber minimizer nor the
    fiber geometry, so all argmin-side machinery may run on the shifted
    field and support vectors are reindexed affinely.
    """
    if f.kappa is None:
        raise CertificateError("tilde_shift requires a kappa certificate")
    kappa = float(f.kappa)
    if kappa == 0.0:
        return TildeShift(f, 0.0)
    if f.base_dim is None:
        raise ValueError("tilde_shift needs a product-structured field")
    n = f.base_dim
    fn = f.fn

    def shifted(z):
        xx = z[:n]
        return fn(z) + 0.5 * kappa * float(xx @ xx)

    grad = None
    if f.grad is not None:
        fgrad = f.grad

        def grad(z):
            gz = np.asarray(fgrad(z), dtype=float).copy()
            gz[:n] += kappa * z[:n]
            return gz

    sup = None
    if f.sup_bound is not None:
        base = f.base_box()
        reach = float(np.max(np.abs(np.stack([base.lower, base.upper]))))
        sup = f.sup_bound + 0.5 * kappa * reach * reach * n
    semiconc = None if f.semiconcavity is None else f.semiconcavity + kappa
    return TildeShift(
        f.with_certificates(fn=shifted, grad=grad, kappa=0.0, sup_bound=sup,
                            semiconcavity=semiconc,
                            name=f"tilde({f.name})" if f.name else "tilde"),
        kappa,
    )


@dataclass
class SupportVector:
    """Lower support vector u for g at x, in the kappa-relaxed sense."""

    x: np.ndarray
    u: np.ndarray
    kappa: float
    non_smooth: bool = False


def _fd_slopes(fn, x, h):
    d = x.size
    fwd = np.empty(d)
    bwd = np.empty(d)
    f0 = fn(x)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        fwd[i] = (fn(x + e) - f0) / h
        bwd[i] = (f0 - fn(x - e)) / h
    return fwd, bwd


def subdifferential_probe(g: ScalarField, x, kappa: Optional[float] = None, *,
                          h: float = 1e-5, kink_factor: float = 50.0,
                          validate_samples: int = 32, radius: float = 1e-2,
                          seed: int = 0, val_tol: float = 1e-7) -> SupportVector:
    """Lower support vector of a kappa-semiconvex g at x.

    Works on the convexification g~(x) = g(x) + (kappa/2)||x||^2: central
    differences give the candidate slope, one-sided slope disagreement
    beyond ``kink_factor * h`` marks a kink, and at kinks the minimal-norm
    candidate among the sampled scales is returned.  Every returned vector
    is validated against the defining inequality on a seeded neighborhood
    sample; failure means the semiconvexity certificate is wrong.
    """
    x = np.asarray(x, dtype=float)
    if kappa is None:
        kappa = g.kappa
    if kappa is None:
        raise CertificateError("subdifferential_probe needs a kappa value")
    kappa = float(kappa)
    gn = g.fn

    def tilde(z):
        return gn(z) + 0.5 * kappa * float(z @ z)

    fwd, bwd = _fd_slopes(tilde, x, h)
    fwd2, bwd2 = _fd_slopes(tilde, x, 0.5 * h)
    non_smooth = bool(
        np.max(np.abs(fwd - bwd)) > kink_factor * h
        or np.max(np.abs(fwd2 - bwd2)) > kink_factor * 0.5 * h
    )
    candidates = [0.5 * (fwd + bwd), 0.5 * (fwd2 + bwd2)]
    if non_smooth:
        candidates.sort(key=lambda c: float(np.linalg.norm(c)))

    rng = np.random.default_rng(seed)
    g0 = gn(x)
    offsets = []
    for _ in range(validate_samples):
        direction = rng.normal(size=x.size)
        nrm = np.linalg.norm(direction)
        if nrm == 0:
            continue
        r = radius * rng.uniform(0.1, 1.0)
        dx = direction * (r / nrm)
        if g.box.contains(x + dx):
            offsets.append(dx)

    scale = 1.0 + abs(g0)
    for cand in candidates:
        u = cand - kappa * x
        ok = all(
            gn(x + dx) - g0 >= float(u @ dx) - 0.5 * kappa * float(dx @ dx)
            - val_tol * scale
            for dx in offsets
        )
        if ok:
            return SupportVector(x, u, kappa, non_smooth)
    raise CertificateError(
        f"no sampled support vector validates at x={x}; "
        "kappa certificate suspect")


@dataclass
class CalmnessPoint:
    x: np.ndarray
    gamma: np.ndarray
    g: float
    calmness: float
    flagged: bool


@dataclass
class CalmnessReport:
    points: List[CalmnessPoint]
    flagged_fraction: float
    radii: List[float]

    def calmness_at(self, i: int) -> float:
        return self.points[i].calmness


def calmness_scan(f: ScalarField, base_grid, radii, tol: float = 1e-9, *,
                  flag_factor: float = 10.0) -> CalmnessReport:
    """Per-point calmness constants and differentiability flags for gamma.

    For each grid point the calmness estimate is the worst ratio
    ``||gamma(x) - gamma(x0)|| / ||x - x0||`` over axis samples at the
    given radii.  A point is flagged (suspected non-differentiable) when
    one-sided secants at the finest radius disagree by more than
    ``flag_factor * radius``, or when central secants drift between the
    two finest radii by the same margin.
    """
    radii = sorted(float(r) for r in radii)
    if not radii:
        raise ValueError("at least one radius is required")
    r_fine = radii[0]
    n = f.base_dim
    points = []
    warm = None
    for x0 in base_grid:
        x0 = np.asarray(x0, dtype=float)
        base = solve_argmin(f, x0, tol, y0=warm)
        warm = base.gamma
        ratios = []
        secants = {}
        for r in radii:
            for i in range(n):
                e = np.zeros(n)
                e[i] = r
                gp = solve_argmin(f, x0 + e, tol, y0=base.gamma).gamma
                gm = solve_argmin(f, x0 - e, tol, y0=base.gamma).gamma
                ratios.append(float(np.linalg.norm(gp - base.gamma)) / r)
                ratios.append(float(np.linalg.norm(gm - base.gamma)) / r)
                secants[(r, i)] = (
                    (gp - base.gamma) / r,          # forward
                    (base.gamma - gm) / r,          # backward
                    (gp - gm) / (2.0 * r),          # central
                )
        flagged = False
        for i in range(n):
            fwd, bwd, _ = secants[(r_fine, i)]
            if float(np.max(np.abs(fwd - bwd))) > flag_factor * r_fine:
                flagged = True
            if len(radii) > 1:
                _, _, c_fine = secants[(r_fine, i)]
                _, _, c_next = secants[(radii[1], i)]
                if float(np.max(np.abs(c_fine - c_next))) > flag_factor * r_fine:
                    flagged = True
        points.append(CalmnessPoint(x0, base.gamma, base.g_value, max(ratios),
                                    flagged))
    frac = sum(p.flagged for p in points) / len(points) if points else 0.0
    return CalmnessReport(points, frac, radii)
