"""Subequation predicates and the product construction with the convexity cone.

A subequation is a jet-set predicate that is closed under adding
semipositive matrices to the Hessian slot (positivity).  The catalog here
is Hessian-only and constant-coefficient: the semipositive cone P, a trace
threshold, a k-th-smallest-eigenvalue threshold (non-convex for k >= 2),
and a shifted minimum eigenvalue.

Product membership F#P asks that every graph-slice pullback of a jet lies
in F and that the fiber Hessian block is semipositive.  Quantifying over
all slopes is undecidable by sampling alone, so verdicts are three-valued;
for jets whose fiber block is positive definite the exact answer follows
from the Schur-complement identity

    slice_hessian(Gamma) = S + (Gamma - Gamma*)^T D (Gamma - Gamma*),
    S = B - C D^{-1} C^T,  Gamma* = -D^{-1} C^T,

so by positivity the jet is a member exactly when S lies in F.  Catalog
entries ship this reducer as their closed-form membership test.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .jets import BlockSplit, Jet2, SymMatrix, pullback_fiber, pullback_slice

__all__ = [
    "EIG_SLACK",
    "MembershipVerdict",
    "PositivityReport",
    "ProductMembershipConfig",
    "Subequation",
    "SubequationError",
    "add_convex_quadratic",
    "catalog",
    "check_positivity",
    "product_membership",
]

# Absolute eigenvalue slack on membership thresholds; absorbs the
# floating-point symmetrization of boundary jets.
EIG_SLACK = 1e-10

# Below this fiber-block smallest eigenvalue the Schur reducer declines to
# answer and product membership falls back to sampled slices.
REDUCER_PD_TOL = 1e-8


class SubequationError(RuntimeError):
    """A structural property (positivity, sum closure) failed."""


class MembershipVerdict(Enum):
    MEMBER = "member"
    NOT_MEMBER = "not_member"
    MEMBER_SAMPLED = "member_sampled"


@dataclass(frozen=True)
class Subequation:
    """Predicate on 2-jets plus structural flags.

    ``membership`` must be deterministic and total on valid jets.  When
    ``hessian_only`` is set the predicate reads only the Hessian slot;
    value-independence then makes the negativity property vacuous, which
    is why all catalog entries advertise ``has_negativity``.
    """

    name: str
    n: int
    membership: Callable[[Jet2], bool]
    constant_coefficient: bool = True
    hessian_only: bool = True
    has_negativity: bool = True
    product_reducer: Optional[Callable[[Jet2, BlockSplit], Optional[bool]]] = None
    member_sampler: Optional[Callable[[np.random.Generator], Jet2]] = None

    def contains(self, jet: Jet2) -> bool:
        if jet.dim != self.n:
            raise ValueError(f"jet dimension {jet.dim} != subequation dimension {self.n}")
        return bool(self.membership(jet))


@dataclass(frozen=True)
class ProductMembershipConfig:
    gamma_samples: int = 64
    gamma_radius: float = 10.0
    seed: int = 0
    use_reducer: bool = True

    def __post_init__(self):
        if self.gamma_samples < 1:
            raise ValueError("gamma_samples must be >= 1")
        if self.gamma_radius <= 0:
            raise ValueError("gamma_radius must be positive")


def _schur_reducer(membership: Callable[[Jet2], bool]):
    def reducer(jet: Jet2, split: BlockSplit) -> Optional[bool]:
        p1, _, B, C, D = split.blocks(jet)
        d_min = float(np.linalg.eigvalsh(D)[0])
        if d_min < -EIG_SLACK:
            return False
        if d_min <= REDUCER_PD_TOL:
            return None  # singular fiber block: no closed form, sample instead
        S = B - C @ np.linalg.solve(D, C.T)
        return bool(membership(Jet2(jet.r, p1, SymMatrix(S))))
    return reducer


def _threshold_entry(name, n, stat, shift_to):
    """Build a Hessian-only catalog entry from an eigenvalue statistic.

    ``stat`` maps a SymMatrix to a scalar that must be >= 0 (with slack);
    ``shift_to(A, margin)`` returns t with stat(A + t I) == margin.
    """
    def membership(jet: Jet2) -> bool:
        return stat(jet.A) >= -EIG_SLACK

    def sampler(rng: np.random.Generator) -> Jet2:
        raw = rng.normal(size=(n, n))
        A = SymMatrix(raw)
        margin = rng.uniform(0.0, 2.0)
        A = SymMatrix(A.a + shift_to(A, margin) * np.eye(n))
        return Jet2(rng.normal(), rng.normal(size=n), A)

    return Subequation(name=name, n=n, membership=membership,
                       product_reducer=_schur_reducer(membership),
                       member_sampler=sampler)


def catalog(name: str, n: int, parameters: Sequence[float] = ()) -> Subequation:
    """Catalog of constant-coefficient, Hessian-only subequations.

    - ``P``: Hessian semipositive.
    - ``trace``: tr(A) >= theta, parameters [theta] (default 0).
    - ``eig-k``: k-th smallest eigenvalue >= theta, parameters [k, theta];
      the shorthand ``eig-2`` (etc.) takes parameters [theta].  Non-convex
      for k >= 2: the jet set is a union of rotations, not a convex cone.
    - ``shifted-min``: smallest eigenvalue >= -c, parameters [c] (default 0).

    Thresholds are evaluated with absolute slack 1e-10.
    """
    if n < 1:
        raise ValueError("dimension must be positive")
    params = [float(t) for t in parameters]

    m = re.fullmatch(r"eig-(\d+)", name)
    if m and m.group(1) != "k":
        k = int(m.group(1))
        theta = params[0] if params else 0.0
    elif name == "eig-k":
        if not params:
            raise ValueError("eig-k requires parameters [k, theta]")
        k = int(params[0])
        theta = params[1] if len(params) > 1 else 0.0
    elif name == "P":
        return _threshold_entry("P", n, lambda A: A.min_eig(),
                                lambda A, mg: mg - A.min_eig())
    elif name == "trace":
        theta = params[0] if params else 0.0
        return _threshold_entry(
            f"trace(theta={theta})", n,
            lambda A: A.trace() - theta,
            lambda A, mg: (theta + mg - A.trace()) / n)
    elif name == "shifted-min":
        c = params[0] if params else 0.0
        if c < 0:
            raise ValueError("shifted-min parameter c must be >= 0")
        return _threshold_entry(
            f"shifted-min(c={c})", n,
            lambda A: A.min_eig() + c,
            lambda A, mg: mg - c - A.min_eig())
    else:
        raise ValueError(f"unknown catalog entry {name!r}")

    if not 1 <= k <= n:
        raise ValueError(f"eigenvalue index k={k} out of range for n={n}")
    return _threshold_entry(
        f"eig-{k}(theta={theta})", n,
        lambda A: float(A.eigenvalues()[k - 1]) - theta,
        lambda A, mg: theta + mg - float(A.eigenvalues()[k - 1]))


@dataclass
class PositivityReport:
    passed: bool
    trials: int
    counter_jet: Optional[Jet2] = None
    counter_pos: Optional[SymMatrix] = None


def check_positivity(F: Subequation, trials: int, seed: int) -> PositivityReport:
    """Sampled positivity check: members stay members under A -> A + G^T G."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if F.member_sampler is None:
        raise ValueError(f"subequation {F.name!r} has no member sampler")
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        jet = F.member_sampler(rng)
        if not F.contains(jet):
            raise SubequationError(f"member sampler of {F.name!r} produced a non-member")
        G = rng.normal(size=(F.n, F.n)) * rng.uniform(0.1, 1.5)
        P = SymMatrix(G.T @ G)
        bumped = Jet2(jet.r, jet.p, jet.A + P)
        if not F.contains(bumped):
            return PositivityReport(False, trials, jet, P)
    return PositivityReport(True, trials)


def product_membership(F: Subequation, split: BlockSplit, jet: Jet2,
                       cfg: ProductMembershipConfig) -> MembershipVerdict:
    """Membership of a jet in the product F#P.

    The fiber restriction must be semipositive; the slice condition is
    decided exactly by the reducer when available, otherwise sampled over
    slopes (uniform entries plus the critical slope -D^{-1} C^T).  A
    sampled pass is reported as the explicitly weaker MEMBER_SAMPLED.
    """
    if not (F.hessian_only and F.constant_coefficient):
        raise ValueError("product membership needs a Hessian-only, "
                         "constant-coefficient subequation")
    split.check(jet)
    fiber = pullback_fiber(jet, split)
    if not fiber.A.is_semipositive(EIG_SLACK):
        return MembershipVerdict.NOT_MEMBER

    if cfg.use_reducer and F.product_reducer is not None:
        exact = F.product_reducer(jet, split)
        if exact is not None:
            return MembershipVerdict.MEMBER if exact else MembershipVerdict.NOT_MEMBER

    rng = np.random.default_rng(cfg.seed)
    _, _, _, C, D = split.blocks(jet)
    gammas = [np.zeros((split.m, split.n))]
    if float(np.linalg.eigvalsh(D)[0]) > REDUCER_PD_TOL:
        gammas.append(-np.linalg.solve(D, C.T))
    for _ in range(cfg.gamma_samples):
        gammas.append(rng.uniform(-cfg.gamma_radius, cfg.gamma_radius,
                                  size=(split.m, split.n)))
    for G in gammas:
        if not F.contains(pullback_slice(jet, split, G)):
            return MembershipVerdict.NOT_MEMBER
    return MembershipVerdict.MEMBER_SAMPLED


def add_convex_quadratic(F: Subequation, f_jet: Jet2, q_jet: Jet2) -> Jet2:
    """Sum closure self-test: member jet + convex quadratic jet stays in F.

    Returns the summed jet.  Raises ``SubequationError`` when the
    implication fails, which indicates a broken catalog predicate.
    """
    if not F.hessian_only:
        raise ValueError("sum closure requires a Hessian-only subequation")
    if not q_jet.A.is_semipositive(EIG_SLACK):
        raise ValueError("quadratic jet must have a semipositive Hessian")
    if not F.contains(f_jet):
        raise ValueError("f_jet is not a member; implication does not apply")
    total = f_jet.add(q_jet)
    if not F.contains(total):
        raise SubequationError(
            f"{F.name!r} violated sum closure with a convex quadratic")
    return total
