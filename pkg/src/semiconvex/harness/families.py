"""Test-field families with exact certificate arithmetic.

Every family returns a :class:`~semiconvex.fields.ScalarField` whose
certificates are computed from the family parameters, not estimated:
eigenvalue arithmetic for quadratics, second-derivative bounds for the
cosine perturbation, and explicit constants for the kinked family.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..fields import Box, ScalarField
from ..supconv import add_fiber_quadratic

__all__ = [
    "block_quadratic_field",
    "generate_field",
    "kinked_base_field",
    "quadratic_plus_cosine_field",
    "random_block_quadratic",
    "regularize_j",
    "schur_complement",
    "zero_field",
]


def _default_boxes(n, m, base_radius=2.0, fiber_radius=2.0):
    return Box.cube(n, base_radius), Box.cube(m, fiber_radius)


def _product_box(base: Box, fiber: Box) -> Box:
    return Box(np.concatenate([base.lower, fiber.lower]),
               np.concatenate([base.upper, fiber.upper]))


def _quad_sup_bound(A, b, c, box: Box) -> float:
    """Coarse but valid bound on sup |0.5 z'Az + b.z + c| over the box."""
    corner = np.maximum(np.abs(box.lower), np.abs(box.upper))
    radius = float(np.linalg.norm(corner))
    spec = float(np.max(np.abs(np.linalg.eigvalsh(A))))
    return 0.5 * spec * radius ** 2 + float(np.linalg.norm(b)) * radius + abs(c)


def schur_complement(B, C, D) -> np.ndarray:
    """Marginal Hessian of a block quadratic: B - C D^{-1} C^T."""
    B = np.asarray(B, float)
    C = np.asarray(C, float)
    D = np.asarray(D, float)
    return B - C @ np.linalg.solve(D, C.T)


def block_quadratic_field(B, C, D, b=None, c: float = 0.0, *,
                          base_box: Optional[Box] = None,
                          fiber_box: Optional[Box] = None,
                          name: str = "block-quadratic") -> ScalarField:
    """Quadratic f(x,y) = 0.5 (x,y)' [[B,C],[C',D]] (x,y) + b.(x,y) + c.

    Requires D positive definite so the fiber minimizer exists and is
    unique.  Certificates come from eigenvalue arithmetic:

    - sigma = lambda_min(D) / 2 (half the sharp value, so the joint
      convexity shift below is well posed),
    - kappa = max(0, lambda_max(C (D - sigma I)^{-1} C' - B)),
    - kappa2 = lambda_max(D), semiconcavity = max(0, lambda_max(A)).
    """
    B = np.asarray(B, float)
    C = np.asarray(C, float)
    D = np.asarray(D, float)
    n, m = B.shape[0], D.shape[0]
    if C.shape != (n, m):
        raise ValueError(f"C must be {n}x{m}")
    d_min = float(np.linalg.eigvalsh(0.5 * (D + D.T))[0])
    if d_min <= 0:
        raise ValueError("fiber block D must be positive definite")
    A = np.zeros((n + m, n + m))
    A[:n, :n] = 0.5 * (B + B.T)
    A[:n, n:] = C
    A[n:, :n] = C.T
    A[n:, n:] = 0.5 * (D + D.T)
    b = np.zeros(n + m) if b is None else np.asarray(b, float)

    sigma = 0.5 * d_min
    shifted_D = A[n:, n:] - sigma * np.eye(m)
    schur_shift = C @ np.linalg.solve(shifted_D, C.T) - A[:n, :n]
    kappa = max(0.0, float(np.linalg.eigvalsh(0.5 * (schur_shift + schur_shift.T))[-1]))
    eigs_A = np.linalg.eigvalsh(A)
    if base_box is None or fiber_box is None:
        base_box, fiber_box = _default_boxes(n, m)
    box = _product_box(base_box, fiber_box)

    def fn(z):
        return 0.5 * float(z @ A @ z) + float(b @ z) + c

    def grad(z):
        return A @ z + b

    return ScalarField(
        dim=n + m, box=box, fn=fn, grad=grad, base_dim=n,
        kappa=kappa + 1e-12, sigma=sigma,
        kappa2=float(np.linalg.eigvalsh(A[n:, n:])[-1]),
        semiconcavity=max(0.0, float(eigs_A[-1])),
        sup_bound=_quad_sup_bound(A, b, c, box),
        fiber_convex=True, name=name,
    )


def random_block_quadratic(n: int, m: int, seed: int, *,
                           schur_eigs: Sequence[float],
                           c_scale: float = 0.5,
                           d_eigs=(0.8, 1.5),
                           linear_scale: float = 0.3,
                           base_box: Optional[Box] = None,
                           fiber_box: Optional[Box] = None) -> ScalarField:
    """Seeded block quadratic with a prescribed marginal Hessian spectrum.

    Draws a random orthogonal frame for the Schur complement S with the
    given eigenvalues, random C and positive definite D, and sets
    B = S + C D^{-1} C^T, so the marginal Hessian of the field is exactly
    S in that frame.
    """
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    S = q @ np.diag(np.asarray(schur_eigs, float)) @ q.T
    C = c_scale * rng.normal(size=(n, m))
    qd, _ = np.linalg.qr(rng.normal(size=(m, m)))
    D = qd @ np.diag(rng.uniform(d_eigs[0], d_eigs[1], size=m)) @ qd.T
    B = S + C @ np.linalg.solve(D, C.T)
    b = linear_scale * rng.normal(size=n + m)
    return block_quadratic_field(B, C, D, b, base_box=base_box,
                                 fiber_box=fiber_box,
                                 name=f"block-quadratic(seed={seed})")


def quadratic_plus_cosine_field(B, C, D, amplitude: float, frequency, *,
                                membership_margin: float,
                                b=None, c: float = 0.0,
                                base_box: Optional[Box] = None,
                                fiber_box: Optional[Box] = None,
                                name: str = "quadratic-plus-cosine") -> ScalarField:
    """Block quadratic plus a bounded perturbation a*cos(w.z).

    The perturbation's Hessian is bounded by a ||w||^2 (rank one), so all
    quadratic certificates are shifted by that bound.  The field is
    admitted only when ``membership_margin - a ||w||^2 >= 0``: the caller
    supplies the margin of the quadratic part to its subequation, and the
    perturbation must not be able to eat it.
    """
    w = np.asarray(frequency, float)
    a = float(amplitude)
    bound = abs(a) * float(w @ w)
    if membership_margin - bound < 0:
        raise ValueError(
            f"perturbation bound a||w||^2 = {bound} exceeds the membership "
            f"margin {membership_margin}")
    quad = block_quadratic_field(B, C, D, b, c, base_box=base_box,
                                 fiber_box=fiber_box)
    qfn, qgrad = quad.fn, quad.grad
    n = quad.base_dim

    def fn(z):
        return qfn(z) + a * np.cos(float(w @ z))

    def grad(z):
        return qgrad(z) - a * np.sin(float(w @ z)) * w

    sigma = quad.sigma - bound
    if sigma <= 0:
        raise ValueError("perturbation destroys the fiber strong convexity")
    return quad.with_certificates(
        fn=fn, grad=grad, sigma=sigma,
        kappa=quad.kappa + bound, kappa2=quad.kappa2 + bound,
        semiconcavity=quad.semiconcavity + bound,
        sup_bound=quad.sup_bound + abs(a),
        name=name,
    )


def kinked_base_field(alpha: float = 1.0, beta: float = 1.0, *,
                      base_box: Optional[Box] = None,
                      fiber_box: Optional[Box] = None,
                      name: str = "kinked-base") -> ScalarField:
    """f(x, y) = (y - alpha |x|)^2 + (beta/2) y^2 on R x R.

    The argmin is gamma(x) = 2 alpha |x| / (2 + beta): linear in |x|, so
    it is calm with constant 2 alpha / (2 + beta) away from 0 and kinked
    at 0.  Fiber certificates are exact; no joint convexity certificate
    exists because of the downward kink of -2 y |x| for y > 0.
    """
    if base_box is None or fiber_box is None:
        base_box, fiber_box = _default_boxes(1, 1)
    box = _product_box(base_box, fiber_box)

    def fn(z):
        x, y = z
        return (y - alpha * abs(x)) ** 2 + 0.5 * beta * y * y

    def grad(z):
        x, y = z
        s = np.sign(x)
        return np.array([
            -2.0 * alpha * s * (y - alpha * abs(x)),
            2.0 * (y - alpha * abs(x)) + beta * y,
        ])

    corner = np.maximum(np.abs(box.lower), np.abs(box.upper))
    xr, yr = corner[0], corner[1]
    sup = (yr + alpha * xr) ** 2 + 0.5 * beta * yr * yr
    return ScalarField(
        dim=2, box=box, fn=fn, grad=grad, base_dim=1,
        sigma=2.0 + beta, kappa2=2.0 + beta, sup_bound=sup,
        fiber_convex=True, name=name,
    )


def zero_field(n: int = 1, m: int = 1, *, base_box: Optional[Box] = None,
               fiber_box: Optional[Box] = None) -> ScalarField:
    """The zero field; every certificate is zero or trivial."""
    if base_box is None or fiber_box is None:
        base_box, fiber_box = _default_boxes(n, m)
    box = _product_box(base_box, fiber_box)
    return ScalarField(
        dim=n + m, box=box, fn=lambda z: 0.0,
        grad=lambda z: np.zeros(n + m), base_dim=n,
        kappa=0.0, sigma=0.0, kappa2=0.0, semiconcavity=0.0, sup_bound=0.0,
        lipschitz=0.0, fiber_convex=True, name="zero",
    )


def _box_from_params(params, key, dim) -> Optional[Box]:
    if key not in params:
        return None
    lo, hi = params[key]
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if lo.ndim == 0:
        lo = np.full(dim, float(lo))
        hi = np.full(dim, float(hi))
    return Box(lo, hi)


def generate_field(family: str, parameters: dict, seed: int = 0) -> ScalarField:
    """Build a test field by family name; see the individual constructors.

    ``parameters`` is a flat mapping (typically a config table).  Matrix
    entries are nested lists; boxes are ``[lower, upper]`` pairs, scalar
    or per-coordinate.
    """
    params = dict(parameters or {})
    if family == "block-quadratic":
        if "schur_eigs" in params:
            n = int(params.get("n", len(params["schur_eigs"])))
            m = int(params.get("m", 1))
            return random_block_quadratic(
                n, m, seed, schur_eigs=params["schur_eigs"],
                c_scale=float(params.get("c_scale", 0.5)),
                d_eigs=tuple(params.get("d_eigs", (0.8, 1.5))),
                linear_scale=float(params.get("linear_scale", 0.3)),
                base_box=_box_from_params(params, "base_box", n),
                fiber_box=_box_from_params(params, "fiber_box", m))
        B = np.asarray(params["B"], float)
        D = np.asarray(params["D"], float)
        n, m = B.shape[0], D.shape[0]
        return block_quadratic_field(
            B, params["C"], D, params.get("b"), float(params.get("c", 0.0)),
            base_box=_box_from_params(params, "base_box", n),
            fiber_box=_box_from_params(params, "fiber_box", m))
    if family == "quadratic-plus-cosine":
        B = np.asarray(params["B"], float)
        D = np.asarray(params["D"], float)
        n, m = B.shape[0], D.shape[0]
        return quadratic_plus_cosine_field(
            B, params["C"], D, float(params["amplitude"]), params["frequency"],
            membership_margin=float(params["membership_margin"]),
            b=params.get("b"), c=float(params.get("c", 0.0)),
            base_box=_box_from_params(params, "base_box", n),
            fiber_box=_box_from_params(params, "fiber_box", m))
    if family == "kinked-base":
        return kinked_base_field(
            float(params.get("alpha", 1.0)), float(params.get("beta", 1.0)),
            base_box=_box_from_params(params, "base_box", 1),
            fiber_box=_box_from_params(params, "fiber_box", 1))
    if family == "zero":
        n = int(params.get("n", 1))
        m = int(params.get("m", 1))
        return zero_field(n, m,
                          base_box=_box_from_params(params, "base_box", n),
                          fiber_box=_box_from_params(params, "fiber_box", m))
    raise ValueError(f"unknown field family {family!r}")


def regularize_j(f: ScalarField, j: int) -> ScalarField:
    """f_j(x, y) = f(x, y) + (1/j) ||y||^2.

    Raises the fiber strong convexity and fibrewise semiconcavity
    certificates by 2/j each; membership of jets in Hessian-only product
    subequations is preserved, since the added Hessian block is
    semipositive.
    """
    j = int(j)
    if j < 1:
        raise ValueError("j must be a positive integer")
    out = add_fiber_quadratic(f, 2.0 / j)
    return out.with_certificates(
        sigma=(f.sigma or 0.0) + 2.0 / j,
        name=f"{f.name}+|y|^2/{j}" if f.name else f"f_{j}",
    )
