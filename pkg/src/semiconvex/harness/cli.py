"""Command-line interface.

Five subcommands, each driven by a single TOML config file and emitting a
JSON report plus a CSV of per-point records:

- ``prox``:      resolvent contraction sweeps against the mu certificate,
- ``argmin``:    argmin / marginal / calmness scans,
- ``supconv``:   partial sup-convolution property sweeps,
- ``check-sub``: sampled product-subequation membership of a field's jets,
- ``minprin``:   the full minimum-principle verification pipeline.

Exit codes: 0 when every configured assertion passes, 1 on assertion
failure (with the failing records in the report), 2 on usage or config
errors.  No environment variables are consulted; everything comes from
the config file.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from ..argmin import calmness_scan
from ..fields import Box, ScalarField
from ..jets import estimate_jet
from ..prox import verify_nonexpansive
from ..solve import ConvergenceError
from ..subequations import (
    MembershipVerdict,
    ProductMembershipConfig,
    catalog,
    product_membership,
)
from ..jets import BlockSplit
from ..supconv import partial_sup_convolve, verify_supconv_properties
from .families import generate_field
from .pipeline import ConfigError, ExperimentConfig, grid_points, verify_minimum_principle
from .reports import jet_cells, jet_columns, write_points_csv, write_report_json

__all__ = ["main", "run_cli"]


def _load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc


def _out_paths(conf: dict):
    out = conf.get("output", {})
    return out.get("report", "report.json"), out.get("csv", "points.csv")


def _box_from(conf_box) -> Box:
    lower, upper = conf_box
    return Box(np.asarray(lower, float), np.asarray(upper, float))


def _field_from(conf: dict) -> ScalarField:
    fld = conf.get("field")
    if not fld:
        raise ConfigError("missing [field] table")
    return generate_field(fld["family"], fld.get("parameters", {}),
                          int(conf.get("seed", 0)))


def _coupled_quadratic(sigma: float) -> ScalarField:
    def fn(z):
        x, y = z
        return 0.5 * (x - y) ** 2 + 0.5 * sigma * y * y

    def grad(z):
        x, y = z
        return np.array([x - y, y - x + sigma * y])

    return ScalarField(dim=2, box=Box.cube(2, 10.0), fn=fn, grad=grad,
                       base_dim=1, kappa=0.0, sigma=sigma,
                       name=f"coupled-quadratic(sigma={sigma})")


def _cmd_prox(conf: dict, report_path, csv_path) -> bool:
    sweep = conf.get("prox", {})
    pairs = int(sweep.get("pairs", 1000))
    tol = float(sweep.get("tol", 1e-7))
    solver_tol = float(sweep.get("solver_tol", 1e-11))
    seed = int(conf.get("seed", 0))

    rows = []
    entries = []
    if "field" in conf:
        fields = [(None, _field_from(conf))]
    else:
        fields = [(float(s), _coupled_quadratic(float(s)))
                  for s in sweep.get("sigmas", [1.0])]
    ok = True
    for sigma, f in fields:
        rep = verify_nonexpansive(f, pairs, seed, tol, solver_tol=solver_tol)
        ok = ok and rep.passed
        rows.append([sigma, rep.mu, rep.max_full_ratio, rep.max_fiber_ratio,
                     rep.full_ok, rep.fiber_ok])
        entries.append({
            "sigma": sigma, "mu": rep.mu, "pairs": rep.pairs,
            "max_full_ratio": rep.max_full_ratio,
            "max_fiber_ratio": rep.max_fiber_ratio,
            "full_ok": rep.full_ok, "fiber_ok": rep.fiber_ok,
        })
    write_points_csv(csv_path, ["sigma", "mu", "max_full_ratio",
                                "max_fiber_ratio", "full_ok", "fiber_ok"], rows)
    write_report_json(report_path, {
        "command": "prox", "config": conf, "sweeps": entries,
        "assertions": [{"name": "ratios_within_bounds", "passed": ok}],
        "passed": ok,
    })
    return ok


def _cmd_argmin(conf: dict, report_path, csv_path) -> bool:
    f = _field_from(conf)
    scan = conf.get("scan", {})
    box = _box_from(scan["box"]) if "box" in scan else f.base_box()
    shape = scan.get("shape", [9] * box.dim)
    radii = [float(r) for r in scan.get("radii", [0.1, 0.05])]
    tol = float(scan.get("tol", 1e-9))
    flag_factor = float(scan.get("flag_factor", 10.0))
    grid = grid_points(box, shape)
    rep = calmness_scan(f, grid, radii, tol, flag_factor=flag_factor)

    n = f.base_dim
    m = f.fiber_dim
    header = (["index"] + [f"x{i}" for i in range(n)]
              + [f"gamma{i}" for i in range(m)] + ["g", "calmness", "flagged"])
    rows = [[i, *p.x, *p.gamma, p.g, p.calmness, p.flagged]
            for i, p in enumerate(rep.points)]
    write_points_csv(csv_path, header, rows)

    asserts = conf.get("assertions", {})
    max_flagged = float(asserts.get("max_flagged_fraction", 1.0))
    checks = [{"name": "flagged_fraction<=max",
               "passed": bool(rep.flagged_fraction <= max_flagged),
               "observed": rep.flagged_fraction, "bound": max_flagged}]
    if "calmness_max" in asserts:
        bound = float(asserts["calmness_max"])
        worst = max(p.calmness for p in rep.points)
        checks.append({"name": "calmness<=max", "passed": bool(worst <= bound),
                       "observed": worst, "bound": bound})
    ok = all(c["passed"] for c in checks)
    write_report_json(report_path, {
        "command": "argmin", "config": conf,
        "flagged_fraction": rep.flagged_fraction, "radii": rep.radii,
        "assertions": checks, "passed": ok,
    })
    return ok


def _cmd_supconv(conf: dict, report_path, csv_path) -> bool:
    f = _field_from(conf)
    sweep = conf.get("sweep", {})
    epsilons = [float(e) for e in sweep.get("epsilons", [1.0, 0.5, 0.1])]
    tol = float(sweep.get("tol", 1e-8))
    shape = sweep.get("shape", [7] * f.dim)
    box = _box_from(sweep["box"]) if "box" in sweep else f.box
    grid = grid_points(box, shape)
    rep = verify_supconv_properties(f, epsilons, grid, tol,
                                    seed=int(conf.get("seed", 0)))

    convs = [partial_sup_convolve(f, e) for e in epsilons]
    header = (["index"] + [f"z{i}" for i in range(f.dim)] + ["f"]
              + [f"supconv_eps{k}" for k in range(len(epsilons))])
    rows = []
    for i, p in enumerate(grid):
        rows.append([i, *p, f(p)] + [c.evaluate(p) for c in convs])
    write_points_csv(csv_path, header, rows)

    ok = rep.passed
    write_report_json(report_path, {
        "command": "supconv", "config": conf,
        "epsilons": rep.epsilons,
        "deltas": [c.delta for c in convs],
        "monotonicity_worst": rep.monotonicity_worst,
        "convexity_worst": rep.convexity_worst,
        "gaps": rep.gaps, "gap_monotone_worst": rep.gap_monotone_worst,
        "assertions": [{"name": "supconv_properties", "passed": ok}],
        "passed": ok,
    })
    return ok


def _cmd_check_sub(conf: dict, report_path, csv_path) -> bool:
    f = _field_from(conf)
    sub = conf.get("subequation")
    if not sub:
        raise ConfigError("missing [subequation] table")
    n = f.base_dim
    m = f.fiber_dim
    F = catalog(sub["name"], n, sub.get("parameters", []))
    check = conf.get("check", {})
    jet_h = float(check.get("jet_h", 1e-3))
    shape = check.get("shape", [5] * f.dim)
    box = _box_from(check["box"]) if "box" in check else f.box
    prod = conf.get("product", {})
    pcfg = ProductMembershipConfig(
        gamma_samples=int(prod.get("gamma_samples", 64)),
        gamma_radius=float(prod.get("gamma_radius", 10.0)),
        seed=int(conf.get("seed", 0)),
        use_reducer=bool(prod.get("use_reducer", True)))
    split = BlockSplit(n, m)
    grid = grid_points(box, shape)

    rows = []
    member = flagged = 0
    for i, p in enumerate(grid):
        est = estimate_jet(f, p, jet_h)
        if not est.stable:
            flagged += 1
            rows.append([i, *p, False, "flagged"])
            continue
        verdict = product_membership(F, split, est.jet, pcfg)
        if verdict is not MembershipVerdict.NOT_MEMBER:
            member += 1
        rows.append([i, *p, True, verdict.value])
    header = ["index"] + [f"z{i}" for i in range(f.dim)] + ["stable", "verdict"]
    write_points_csv(csv_path, header, rows)

    stable = len(grid) - flagged
    frac = member / stable if stable else 0.0
    min_frac = float(conf.get("assertions", {}).get("min_member_fraction", 0.0))
    ok = frac >= min_frac
    write_report_json(report_path, {
        "command": "check-sub", "config": conf,
        "points": len(grid), "stable": stable, "member": member,
        "member_fraction_stable": frac,
        "assertions": [{"name": "member_fraction>=min", "passed": ok,
                        "observed": frac, "bound": min_frac}],
        "passed": ok,
    })
    return ok


def _experiment_config(conf: dict) -> ExperimentConfig:
    try:
        sub = conf["subequation"]
        fld = conf["field"]
        grid = conf["grid"]
        pipe = conf.get("pipeline", {})
        contact = conf.get("contact", {})
        asserts = conf.get("assertions", {})
        return ExperimentConfig(
            subequation_name=sub["name"],
            subequation_n=int(sub["n"]),
            subequation_parameters=[float(t) for t in sub.get("parameters", [])],
            family=fld["family"],
            family_parameters=fld.get("parameters", {}),
            seed=int(conf.get("seed", 0)),
            grid_box=_box_from(grid["box"]),
            grid_shape=tuple(int(s) for s in grid["shape"]),
            epsilons=[float(e) for e in pipe.get("epsilons", [0.04, 0.02])],
            j_values=[int(j) for j in pipe.get("j_values", [4, 8])],
            stages=pipe.get("stages"),
            monotone_stride=int(pipe.get("monotone_stride", 1)),
            monotone_tol=float(pipe.get("monotone_tol", 1e-7)),
            jet_h=float(pipe.get("jet_h", 1e-3)),
            membership_slack=float(pipe.get("membership_slack", 1e-6)),
            stability_factor=float(pipe.get("stability_factor", 10.0)),
            solver_tol=float(pipe.get("solver_tol", 1e-9)),
            inner_tol=float(pipe.get("inner_tol", 2e-9)),
            fiber_margin_rel=float(pipe.get("fiber_margin_rel", 1e-3)),
            direct_marginal=bool(pipe.get("direct_marginal", True)),
            contact_enabled=bool(contact.get("enabled", True)),
            contact_radius=float(contact.get("radius", 0.05)),
            contact_samples=int(contact.get("samples", 8)),
            contact_tol=float(contact.get("tol", 1e-7)),
            max_violation_rate=float(asserts.get("max_violation_rate", 0.0)),
            min_stable_fraction=float(asserts.get("min_stable_fraction", 0.0)),
            require_monotone=bool(asserts.get("require_monotone", True)),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigError(f"bad experiment config: {exc!r}") from exc


def _cmd_minprin(conf: dict, report_path, csv_path) -> bool:
    cfg = _experiment_config(conf)
    rep = verify_minimum_principle(cfg)
    payload = rep.summary_dict()
    payload["config"] = conf
    payload["command"] = "minprin"
    write_report_json(report_path, payload)

    n = cfg.subequation_n
    m = None
    for r in rep.records:
        if r.gamma is not None:
            m = r.gamma.size
            break
    m = m or 1
    header = (["stage_j", "stage_eps", "index"]
              + [f"x{i}" for i in range(n)] + [f"gamma{i}" for i in range(m)]
              + ["g"] + jet_columns(n) + ["stable", "verdict", "q_ok"])
    rows = []
    for r in rep.records:
        gamma = list(r.gamma) if r.gamma is not None else [None] * m
        rows.append([r.stage_j, r.stage_eps, r.index, *r.x, *gamma, r.g,
                     *jet_cells(r.jet, n), r.stable, r.verdict, r.q_ok])
    write_points_csv(csv_path, header, rows)
    return rep.passed


_COMMANDS = {
    "prox": _cmd_prox,
    "argmin": _cmd_argmin,
    "supconv": _cmd_supconv,
    "check-sub": _cmd_check_sub,
    "minprin": _cmd_minprin,
}


def run_cli(argv) -> int:
    """Entry point; returns the process exit status."""
    parser = argparse.ArgumentParser(
        prog="semiconvex",
        description="Numerical semiconvex-analysis experiment harness")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="TOML config file")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0

    report_path = csv_path = None
    try:
        conf = _load_config(args.config)
        report_path, csv_path = _out_paths(conf)
        ok = _COMMANDS[args.command](conf, report_path, csv_path)
        return 0 if ok else 1
    except (ConfigError, KeyError, ValueError, TypeError, OSError) as exc:
        record = {"error": {"type": type(exc).__name__, "message": str(exc)},
                  "passed": False}
        if report_path:
            try:
                write_report_json(report_path, record)
            except OSError:
                pass
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        record = {"error": {"type": type(exc).__name__, "message": str(exc)},
                  "passed": False}
        if report_path:
            write_report_json(report_path, record)
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
