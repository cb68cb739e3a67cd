"""The minimum-principle verification pipeline.

For a certified field family and a Hessian-only constant-coefficient
subequation, each stage (j, eps) of the pipeline

1. regularizes: f_j = f + (1/j)||y||^2,
2. approximates: f_eps = partial sup-convolution of f_j plus (eps/2)||y||^2,
3. minimizes: gamma and the marginal g on the base grid,
4. estimates 2-jets of the marginal with a stability flag,
5. tests membership of each stable jet (with a small Hessian slack), and
6. checks the contact quadratic dominates f_eps near the touching point.

Monotone convergence of the marginals (in eps and in j) is verified on a
strided subgrid.  Flagged (unstable) points are the numerical stand-in
for the measure-zero exceptional set: they are excluded from the
violation denominator but reported.  Per-point failures are recorded and
never abort the sweep.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Tuple

import numpy as np

from ..argmin import marginal_field, solve_argmin
from ..fields import Box, DomainError, ScalarField
from ..jets import Jet2, estimate_jet
from ..solve import ConvergenceError
from ..subequations import Subequation, catalog
from ..supconv import build_f_epsilon
from .contact import build_contact_quadratic
from .families import generate_field, regularize_j

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentReport",
    "PointRecord",
    "StageSummary",
    "grid_points",
    "verify_minimum_principle",
]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def grid_points(box: Box, shape) -> List[np.ndarray]:
    """Row-major lattice over the box, shape[i] points per coordinate."""
    axes = [np.linspace(box.lower[i], box.upper[i], int(shape[i]))
            for i in range(box.dim)]
    return [np.array(p) for p in itertools.product(*axes)]


@dataclass
class ExperimentConfig:
    subequation_name: str
    subequation_n: int
    family: str
    grid_box: Box
    grid_shape: Tuple[int, ...]
    epsilons: List[float]
    j_values: List[int]
    subequation_parameters: List[float] = dc_field(default_factory=list)
    family_parameters: dict = dc_field(default_factory=dict)
    seed: int = 0
    stages: Optional[List[Tuple[int, float]]] = None
    monotone_stride: int = 1
    monotone_tol: float = 1e-7
    jet_h: float = 1e-3
    membership_slack: float = 1e-6
    stability_factor: float = 10.0
    solver_tol: float = 1e-9
    inner_tol: float = 2e-9
    fiber_margin_rel: float = 1e-3
    contact_enabled: bool = True
    contact_radius: float = 0.05
    contact_samples: int = 8
    contact_tol: float = 1e-7
    direct_marginal: bool = True
    max_violation_rate: float = 0.0
    min_stable_fraction: float = 0.0
    require_monotone: bool = True

    def __post_init__(self):
        if len(self.grid_shape) != self.grid_box.dim:
            raise ConfigError("grid shape and grid box dimensions differ")
        if self.grid_box.dim != self.subequation_n:
            raise ConfigError("grid box dimension must equal the subequation dimension")
        eps = list(self.epsilons)
        if not eps or any(e <= 0 for e in eps):
            raise ConfigError("epsilons must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("epsilons must be strictly decreasing")
        js = list(self.j_values)
        if not js or any(int(j) < 1 for j in js):
            raise ConfigError("j values must be positive integers")
        if any(b <= a for a, b in zip(js, js[1:])):
            raise ConfigError("j values must be strictly increasing")
        if self.stages is None:
            self.stages = [(j, e) for j in js for e in eps]
        else:
            self.stages = [(int(j), float(e)) for j, e in self.stages]
            for j, e in self.stages:
                if j not in js or e not in eps:
                    raise ConfigError(f"stage ({j}, {e}) not in the j/eps lists")
        if self.monotone_stride < 1:
            raise ConfigError("monotone stride must be >= 1")


@dataclass
class PointRecord:
    stage_j: Optional[int]
    stage_eps: Optional[float]
    index: int
    x: np.ndarray
    gamma: Optional[np.ndarray]
    g: Optional[float]
    jet: Optional[Jet2]
    stable: Optional[bool]
    verdict: str  # member / violation / flagged / error
    q_ok: Optional[bool]
    detail: str = ""


@dataclass
class StageSummary:
    j: Optional[int]
    eps: Optional[float]
    total: int = 0
    errors: int = 0
    flagged: int = 0
    members: int = 0
    violations: int = 0
    q_checked: int = 0
    q_failed: int = 0

    @property
    def stable(self) -> int:
        return self.members + self.violations

    def as_dict(self) -> dict:
        return {
            "j": self.j, "eps": self.eps, "total": self.total,
            "errors": self.errors, "flagged": self.flagged,
            "members": self.members, "violations": self.violations,
            "stable": self.stable, "q_checked": self.q_checked,
            "q_failed": self.q_failed,
        }


@dataclass
class ExperimentReport:
    config: dict
    records: List[PointRecord]
    stage_summaries: List[StageSummary]
    violation_rate_stable: float
    exception_rate: float
    stable_fraction: float
    monotone: dict
    constants: dict
    assertions: List[dict]

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def summary_dict(self) -> dict:
        return {
            "config": self.config,
            "stages": [s.as_dict() for s in self.stage_summaries],
            "totals": {
                "violation_rate_stable": self.violation_rate_stable,
                "exception_rate": self.exception_rate,
                "stable_fraction": self.stable_fraction,
                "points": len(self.records),
            },
            "monotone": self.monotone,
            "constants": self.constants,
            "assertions": self.assertions,
            "passed": self.passed,
        }


def _argmin_margin(f: ScalarField, rel: float) -> float:
    return rel * float(np.min(f.fiber_box().width))


def _secant_slope(f_eps, x, gamma0, h, tol, cache):
    """Central-secant estimate of the argmin slope D gamma at x.

    Jet estimation has already solved the argmin at the stencil points, so
    the shared cache normally makes this free.
    """
    n, m = x.size, gamma0.size

    def gamma_at(p):
        hit = cache.get(p.tobytes())
        if hit is not None:
            return hit.gamma
        return solve_argmin(f_eps, p, tol, y0=gamma0).gamma

    G = np.empty((m, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        G[:, i] = (gamma_at(x + e) - gamma_at(x - e)) / (2.0 * h)
    return G


def _q_dominates(q, f_eps, x0, y0, radius, samples, tol, rng) -> Tuple[bool, float]:
    """Sampled check that the contact quadratic dominates f_eps near (x0, y0)."""
    dim = x0.size + y0.size
    center = np.concatenate([x0, y0])
    worst = 0.0
    for _ in range(samples):
        direction = rng.normal(size=dim)
        direction /= np.linalg.norm(direction)
        z = center + direction * radius * rng.uniform(0.05, 1.0)
        gap = f_eps.fn(z) - q.field.fn(z)
        worst = max(worst, float(gap))
        if worst > tol:
            return False, worst
    return True, worst


def _run_stage(F: Subequation, f_eps: ScalarField, cfg: ExperimentConfig,
               grid, stage_j, stage_eps, records, rng) -> StageSummary:
    summary = StageSummary(stage_j, stage_eps)
    cache: dict = {}
    margin = _argmin_margin(f_eps, cfg.fiber_margin_rel)
    marg = marginal_field(f_eps, cfg.solver_tol, gamma_cache=cache,
                          boundary_margin=margin)
    for idx, x in enumerate(grid):
        summary.total += 1
        try:
            est = estimate_jet(marg, x, cfg.jet_h,
                               stability_factor=cfg.stability_factor)
            res = cache[x.tobytes()]
        except (ConvergenceError, DomainError) as exc:
            summary.errors += 1
            records.append(PointRecord(stage_j, stage_eps, idx, x, None, None,
                                       None, None, "error", None, str(exc)))
            continue
        if not est.stable:
            summary.flagged += 1
            records.append(PointRecord(stage_j, stage_eps, idx, x, res.gamma,
                                       res.g_value, est.jet, False, "flagged",
                                       None))
            continue
        member = F.contains(est.jet.with_hessian_slack(cfg.membership_slack))
        verdict = "member" if member else "violation"
        if member:
            summary.members += 1
        else:
            summary.violations += 1
        q_ok = None
        if cfg.contact_enabled:
            kappa2 = f_eps.kappa2 if f_eps.kappa2 is not None else 0.0
            G = _secant_slope(f_eps, x, res.gamma, cfg.jet_h, cfg.solver_tol,
                              cache)
            q = build_contact_quadratic(est.jet, x, res.gamma, G, kappa2,
                                        stage_eps if stage_eps else cfg.membership_slack)
            q_ok, gap = _q_dominates(q, f_eps, x, res.gamma, cfg.contact_radius,
                                     cfg.contact_samples, cfg.contact_tol, rng)
            summary.q_checked += 1
            if not q_ok:
                summary.q_failed += 1
        records.append(PointRecord(stage_j, stage_eps, idx, x, res.gamma,
                                   res.g_value, est.jet, True, verdict, q_ok))
    return summary


def verify_minimum_principle(cfg: ExperimentConfig) -> ExperimentReport:
    """Run the full verification pipeline for one experiment config."""
    F = catalog(cfg.subequation_name, cfg.subequation_n,
                cfg.subequation_parameters)
    f = generate_field(cfg.family, cfg.family_parameters, cfg.seed)
    if f.base_dim != cfg.subequation_n:
        raise ConfigError("field base dimension must match the subequation")
    grid = grid_points(cfg.grid_box, cfg.grid_shape)
    rng = np.random.default_rng(cfg.seed)

    # The grid must sit in the shrunken domain U(delta) for the largest
    # epsilon, where delta is computed from the regularized field's bound.
    eps_max = max(cfg.epsilons)
    worst_bound = max(regularize_j(f, j).sup_bound for j in cfg.j_values)
    delta_max = 2.0 * np.sqrt(eps_max * worst_bound)
    base_box = f.base_box()
    if not all(base_box.contains(x, margin=delta_max) for x in grid):
        raise ConfigError(
            f"grid exits the shrunken domain U(delta), delta={delta_max:.4f}; "
            "shrink the grid box or the largest epsilon")

    records: List[PointRecord] = []
    summaries: List[StageSummary] = []

    if cfg.direct_marginal and f.sigma and f.sigma > 0:
        summaries.append(_run_stage(F, f, cfg, grid, None, None, records, rng))

    f_js = {j: regularize_j(f, j) for j in cfg.j_values}
    for j, eps in cfg.stages:
        f_eps = build_f_epsilon(f_js[j], eps, cfg.inner_tol)
        summaries.append(_run_stage(F, f_eps, cfg, grid, j, eps, records, rng))

    # Monotone convergence on the strided subgrid: g_j decreases in j and
    # g_{j, eps} decreases as eps decreases, staying above g_j.
    sub = grid[::cfg.monotone_stride]
    j_worst = np.inf
    eps_worst = np.inf
    direct_vals = {}
    for j in cfg.j_values:
        vals = []
        warm = None
        for x in sub:
            r = solve_argmin(f_js[j], x, cfg.solver_tol, y0=warm)
            warm = r.gamma
            vals.append(r.g_value)
        direct_vals[j] = vals
    for j_hi, j_lo in zip(cfg.j_values, cfg.j_values[1:]):
        # larger j means smaller regularization, so values decrease
        j_worst = min(j_worst, min(a - b for a, b in
                                   zip(direct_vals[j_hi], direct_vals[j_lo])))
    for j in cfg.j_values:
        prev = None
        for eps in cfg.epsilons:
            f_eps = build_f_epsilon(f_js[j], eps, cfg.inner_tol)
            vals = []
            warm = None
            for x in sub:
                r = solve_argmin(f_eps, x, cfg.solver_tol, y0=warm)
                warm = r.gamma
                vals.append(r.g_value)
            if prev is not None:
                eps_worst = min(eps_worst, min(a - b for a, b in zip(prev, vals)))
            prev = vals
        eps_worst = min(eps_worst, min(a - b for a, b in
                                       zip(prev, direct_vals[j])))
    monotone = {
        "j_ok": bool(j_worst >= -cfg.monotone_tol),
        "eps_ok": bool(eps_worst >= -cfg.monotone_tol),
        "j_worst_slack": float(j_worst),
        "eps_worst_slack": float(eps_worst),
        "subgrid_points": len(sub),
    }

    stable = sum(s.stable for s in summaries)
    violations = sum(s.violations for s in summaries)
    flagged = sum(s.flagged for s in summaries)
    errors = sum(s.errors for s in summaries)
    total = sum(s.total for s in summaries)
    violation_rate = violations / stable if stable else 0.0
    # exceptions = every point not verified a member, so the counting chain
    # violations <= exceptions <= total holds structurally
    exception_rate = (violations + flagged + errors) / total if total else 0.0
    stable_fraction = stable / total if total else 0.0

    constants = {
        "delta_max": float(delta_max),
        "q_failures": sum(s.q_failed for s in summaries),
        "errors": errors,
    }

    assertions = [
        {"name": "violation_rate_stable<=max",
         "passed": bool(violation_rate <= cfg.max_violation_rate),
         "observed": violation_rate, "bound": cfg.max_violation_rate},
        {"name": "stable_fraction>=min",
         "passed": bool(stable_fraction >= cfg.min_stable_fraction),
         "observed": stable_fraction, "bound": cfg.min_stable_fraction},
        {"name": "q_dominates_f",
         "passed": bool(sum(s.q_failed for s in summaries) == 0),
         "observed": sum(s.q_failed for s in summaries), "bound": 0},
    ]
    if cfg.require_monotone:
        assertions.append({"name": "monotone_convergence",
                           "passed": bool(monotone["j_ok"] and monotone["eps_ok"]),
                           "observed": [monotone["j_worst_slack"],
                                        monotone["eps_worst_slack"]],
                           "bound": -cfg.monotone_tol})

    return ExperimentReport(
        config={}, records=records, stage_summaries=summaries,
        violation_rate_stable=violation_rate, exception_rate=exception_rate,
        stable_fraction=stable_fraction, monotone=monotone,
        constants=constants, assertions=assertions,
    )
