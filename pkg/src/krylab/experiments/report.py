"""Experiment reports: JSON schema, CSV traces and optional SVG charts."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict

SCHEMA_VERSION = "1.0"
TRACE_COLUMNS = ("n", "residual", "distance", "approximant_norm")
TIMING_FIELDS = ("wall_times",)


def finite(obj: Any) -> Any:
    """Convert numpy scalars/arrays to plain Python; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return finite(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [finite(obj.real), finite(obj.imag)]
    return obj


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TraceRow(_Model):
    n: int
    residual: float | None = None
    distance: float | None = None
    approximant_norm: float | None = None


class Check(_Model):
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    asserted: bool = True


class WindowGuard(_Model):
    status: Literal["ok", "violated", "not_applicable"]
    max_outer_mass: float | None = None
    threshold: float = 1e-8
    fraction: float = 0.1


class ExperimentReport(_Model):
    schema_version: str = SCHEMA_VERSION
    experiment_id: str
    config: dict[str, Any]
    status: Literal["ok", "guard_violation", "check_failed"]
    exit_code: int
    verdicts: dict[str, dict[str, Any]]
    checks: list[Check]
    metrics: dict[str, Any]
    traces: dict[str, list[TraceRow]]
    window_guard: WindowGuard
    notes: list[str]
    wall_times: dict[str, float]

    def to_json(self, drop_timing: bool = False) -> str:
        data = self.model_dump(mode="json")
        if drop_timing:
            for key in TIMING_FIELDS:
                data.pop(key, None)
        return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.model_validate_json(text)


def trace_rows(rows: list[dict]) -> list[TraceRow]:
    return [TraceRow(**finite(r)) for r in rows]


def trace_csv(rows: list[TraceRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for row in rows:
        writer.writerow(["" if getattr(row, c) is None else repr(getattr(row, c))
                         for c in TRACE_COLUMNS])
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def svg_chart(report: ExperimentReport) -> str:
    """Line chart of every trace's distance (or residual) on a log scale."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for name, rows in sorted(report.traces.items()):
        for col in ("distance", "residual"):
            pts = [(r.n, getattr(r, col)) for r in rows if getattr(r, col) is not None]
            pts = [(n, max(v, 1e-300)) for n, v in pts]
            if pts:
                ax.semilogy(*zip(*pts), label=f"{name} {col}")
                break
    ax.set_xlabel("n")
    ax.set_ylabel("distance / residual")
    ax.set_title(report.experiment_id)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize="x-small")
    buf = io.StringIO()
    plt.rcParams["svg.hashsalt"] = "krylab"
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def write_report(report: ExperimentReport, out_dir: str | os.PathLike, svg: bool = False) -> list[Path]:
    """Write ``<id>.json``, one CSV per trace and optionally ``<id>.svg``."""
    out = Path(out_dir)
    stem = report.experiment_id
    written = []
    path = out / f"{stem}.json"
    atomic_write(path, report.to_json())
    written.append(path)
    for name, rows in sorted(report.traces.items()):
        p = out / f"{stem}.{name}.csv"
        atomic_write(p, trace_csv(rows))
        written.append(p)
    if svg:
        p = out / f"{stem}.svg"
        atomic_write(p, svg_chart(report))
        written.append(p)
    return written
