"""Deterministic report emission: one JSON summary and one CSV of points.

Identical configs must produce byte-identical outputs, so floats are
written with ``repr`` (shortest round-trip form), JSON keys are sorted,
and no wall-clock data enters the files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import __version__

__all__ = ["SCHEMA_VERSION", "write_points_csv", "write_report_json"]

SCHEMA_VERSION = 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def write_report_json(path, payload: dict) -> None:
    """Write the JSON report with provenance and stable formatting."""
    body = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
    }
    body.update(_jsonable(payload))
    text = json.dumps(body, sort_keys=True, indent=2)
    Path(path).write_text(text + "\n")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_points_csv(path, header: Sequence[str], rows) -> None:
    """Write per-point records; every cell is formatted via :func:`_cell`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def jet_columns(n: int) -> list:
    cols = ["jet_value"] + [f"jet_grad{i}" for i in range(n)]
    cols += [f"jet_hess{i}{j}" for i in range(n) for j in range(i, n)]
    return cols


def jet_cells(jet, n: int) -> list:
    if jet is None:
        return [None] * (1 + n + n * (n + 1) // 2)
    cells = [jet.r] + [jet.p[i] for i in range(n)]
    cells += [jet.A.a[i, j] for i in range(n) for j in range(i, n)]
    return cells
