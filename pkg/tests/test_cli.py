import json

import pytest

from semiconvex.harness.cli import run_cli


MINPRIN_POSITIVE = """
seed = 5

[subequation]
name = "trace"
n = 2
parameters = [0.0]

[field]
family = "block-quadratic"
[field.parameters]
B = [[1.0, 0.0], [0.0, 1.0]]
C = [[1.0], [0.0]]
D = [[1.0]]

[grid]
box = [[-0.5, -0.5], [0.5, 0.5]]
shape = [6, 6]

[pipeline]
epsilons = [0.04, 0.02]
j_values = [4, 8]
stages = [[8, 0.02]]
monotone_stride = 12

[contact]
samples = 4

[assertions]
min_stable_fraction = 0.9

[output]
report = "{report}"
csv = "{csv}"
"""

MINPRIN_NEGATIVE = MINPRIN_POSITIVE.replace(
    "B = [[1.0, 0.0], [0.0, 1.0]]", "B = [[0.1, 0.0], [0.0, 0.1]]")


def write_config(tmp_path, text, name="config.toml"):
    report = tmp_path / "report.json"
    csv = tmp_path / "points.csv"
    cfg = tmp_path / name
    cfg.write_text(text.format(report=report, csv=csv))
    return cfg, report, csv


def test_minprin_positive_exit_zero(tmp_path):
    cfg, report, csv = write_config(tmp_path, MINPRIN_POSITIVE)
    assert run_cli(["minprin", "--config", str(cfg)]) == 0
    body = json.loads(report.read_text())
    assert body["passed"] is True
    assert body["schema_version"] == 1
    assert body["totals"]["violation_rate_stable"] == 0.0
    header = csv.read_text().splitlines()[0].split(",")
    assert header[:3] == ["stage_j", "stage_eps", "index"]
    assert "verdict" in header


def test_minprin_negative_exit_one(tmp_path):
    cfg, report, csv = write_config(tmp_path, MINPRIN_NEGATIVE)
    assert run_cli(["minprin", "--config", str(cfg)]) == 1
    body = json.loads(report.read_text())
    assert body["passed"] is False
    assert body["totals"]["violation_rate_stable"] >= 0.99
    assert any("violation" in line for line in csv.read_text().splitlines())


def test_minprin_byte_deterministic(tmp_path):
    cfg, report, csv = write_config(tmp_path, MINPRIN_POSITIVE)
    assert run_cli(["minprin", "--config", str(cfg)]) == 0
    first = (report.read_bytes(), csv.read_bytes())
    assert run_cli(["minprin", "--config", str(cfg)]) == 0
    second = (report.read_bytes(), csv.read_bytes())
    assert first == second


def test_missing_config_exit_two(tmp_path):
    assert run_cli(["minprin", "--config", str(tmp_path / "nope.toml")]) == 2


def test_malformed_config_exit_two(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("this is { not toml ]")
    assert run_cli(["minprin", "--config", str(cfg)]) == 2


def test_config_error_writes_machine_readable_record(tmp_path):
    # valid TOML, invalid experiment: epsilons not decreasing
    text = MINPRIN_POSITIVE.replace("epsilons = [0.04, 0.02]",
                                    "epsilons = [0.02, 0.04]")
    cfg, report, _ = write_config(tmp_path, text)
    assert run_cli(["minprin", "--config", str(cfg)]) == 2
    body = json.loads(report.read_text())
    assert body["passed"] is False
    assert body["error"]["type"] == "ConfigError"


def test_unknown_subcommand_exit_two(tmp_path):
    assert run_cli(["frobnicate", "--config", "x.toml"]) == 2


PROX_SWEEP = """
seed = 3

[prox]
sigmas = [1.0]
pairs = 50
tol = 1e-7

[output]
report = "{report}"
csv = "{csv}"
"""


def test_prox_sweep_cli(tmp_path):
    cfg, report, csv = write_config(tmp_path, PROX_SWEEP)
    assert run_cli(["prox", "--config", str(cfg)]) == 0
    body = json.loads(report.read_text())
    sweep = body["sweeps"][0]
    assert sweep["mu"] == pytest.approx(0.70711, abs=5e-6)
    assert sweep["max_fiber_ratio"] <= sweep["mu"]
    assert sweep["max_full_ratio"] <= 1.0 + 1e-7
    assert csv.read_text().splitlines()[0].startswith("sigma,mu")


ARGMIN_SCAN = """
seed = 1

[field]
family = "kinked-base"

[scan]
box = [[-1.0], [1.0]]
shape = [11]
radii = [0.1, 0.05]

[assertions]
max_flagged_fraction = 0.2

[output]
report = "{report}"
csv = "{csv}"
"""


def test_argmin_scan_cli(tmp_path):
    cfg, report, csv = write_config(tmp_path, ARGMIN_SCAN)
    assert run_cli(["argmin", "--config", str(cfg)]) == 0
    body = json.loads(report.read_text())
    assert 0.0 < body["flagged_fraction"] <= 0.2
    rows = csv.read_text().splitlines()
    assert rows[0] == "index,x0,gamma0,g,calmness,flagged"
    assert len(rows) == 12


SUPCONV_SWEEP = """
seed = 2

[field]
family = "zero"
[field.parameters]
n = 1
m = 1

[sweep]
epsilons = [0.5, 0.1]
shape = [5, 5]
box = [[-0.5, -0.5], [0.5, 0.5]]

[output]
report = "{report}"
csv = "{csv}"
"""


def test_supconv_sweep_cli(tmp_path):
    cfg, report, csv = write_config(tmp_path, SUPCONV_SWEEP)
    assert run_cli(["supconv", "--config", str(cfg)]) == 0
    body = json.loads(report.read_text())
    assert body["passed"] is True
    assert body["deltas"] == [0.0, 0.0]  # zero field has M = 0
    assert len(csv.read_text().splitlines()) == 26


CHECK_SUB = """
seed = 4

[field]
family = "block-quadratic"
[field.parameters]
B = [[1.0, 0.0], [0.0, 1.0]]
C = [[1.0], [0.0]]
D = [[1.0]]

[subequation]
name = "trace"
parameters = [0.0]

[check]
shape = [3, 3, 3]
box = [[-0.5, -0.5, -0.5], [0.5, 0.5, 0.5]]

[assertions]
min_member_fraction = 1.0

[output]
report = "{report}"
csv = "{csv}"
"""


def test_check_sub_cli(tmp_path):
    cfg, report, csv = write_config(tmp_path, CHECK_SUB)
    assert run_cli(["check-sub", "--config", str(cfg)]) == 0
    body = json.loads(report.read_text())
    assert body["member_fraction_stable"] == 1.0
    rows = csv.read_text().splitlines()
    assert rows[0] == "index,z0,z1,z2,stable,verdict"
    assert all(row.endswith("member") for row in rows[1:])
