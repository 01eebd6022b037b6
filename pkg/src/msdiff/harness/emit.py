"""Write reports as JSON, CSV and whitespace-separated .dat files."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict

import numpy as np

from ..report import ExperimentReport


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (np.integer, np.bool_)):
        return v.item()
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(_plain(v))


def _write_rows(path, rows: list[dict]) -> None:
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols or ["eps"])
        for r in rows:
            w.writerow([_cell(r[c]) if c in r else "" for c in cols])


def report_dict(report: ExperimentReport) -> dict:
    return {"experiment": report.experiment, "config": report.config, "passed": report.passed,
            "decisions": [asdict(d) for d in report.decisions], "summary": _plain(report.summary),
            "rows": _plain(report.rows), "records": _plain(report.records), "flags": report.flags,
            "series": {k: {"x": _plain(x), "y": _plain(y)} for k, (x, y) in report.series.items()},
            "steps": report.steps, "wall_clock_seconds": report.wall_clock}


def emit(report: ExperimentReport, out_dir, formats=("json", "csv", "dat")) -> list[str]:
    """Write the requested formats into ``out_dir`` and return the file paths.

    summary.csv holds one row per eps and no timing data, so identical
    runs produce identical bytes.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"output directory {out_dir!r} is not writable: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory {out_dir!r} is not writable")
    written = []
    if "json" in formats:
        p = os.path.join(out_dir, "report.json")
        with open(p, "w") as fh:
            json.dump(report_dict(report), fh, indent=2)
        written.append(p)
    if "csv" in formats:
        p = os.path.join(out_dir, "summary.csv")
        _write_rows(p, report.rows)
        written.append(p)
        if report.records:
            p = os.path.join(out_dir, "replicates.csv")
            _write_rows(p, report.records)
            written.append(p)
    if "dat" in formats:
        for name, (x, y) in report.series.items():
            p = os.path.join(out_dir, f"{name}.dat")
            with open(p, "w") as fh:
                fh.write(f"# x {name}\n")
                for a, b in zip(np.asarray(x, float), np.asarray(y, float)):
                    fh.write(f"{float(a)!r} {float(b)!r}\n")
            written.append(p)
    return written
