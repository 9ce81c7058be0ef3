"""File formats: trace tables (CSV), full traces (NPZ), instances and
certificate reports (JSON), and two/three-column plot data.

Trace table CSV::

    k,gs_norm_sq,phi_x_gap,phi_y_gap,lyapunov,envelope_obj,envelope_grad

Reals are written with 17 significant digits so that they parse back to the
same double. Missing or non-finite values are written as empty fields.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .certify import CertificateReport
from .problem import LassoProblem, LinearOperator, make_lasso
from .solvers import SolverTrace, TraceMetadata

__all__ = [
    "TRACE_COLUMNS",
    "FormatError",
    "TraceTable",
    "format_real",
    "write_trace_csv",
    "read_trace_csv",
    "save_trace",
    "load_trace",
    "instance_to_dict",
    "instance_from_dict",
    "save_instance",
    "load_instance",
    "save_report",
    "load_report",
    "plot_series",
    "write_plot_data",
]

TRACE_COLUMNS = ("k", "gs_norm_sq", "phi_x_gap", "phi_y_gap", "lyapunov", "envelope_obj", "envelope_grad")


class FormatError(ValueError):
    """A file does not follow the expected layout."""


def format_real(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if not math.isfinite(v):
        return ""
    return format(v, ".17g")


@dataclass(eq=False)
class TraceTable:
    """Column view of a trace CSV. Columns that are entirely empty are ``None``;
    isolated empty cells are ``nan``."""

    columns: dict

    def __len__(self) -> int:
        return len(self.columns["k"])

    def __getitem__(self, name):
        return self.columns[name]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TraceTable):
            return NotImplemented
        for name in TRACE_COLUMNS:
            a, b = self.columns.get(name), other.columns.get(name)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b, equal_nan=True):
                return False
        return True


def write_trace_csv(columns: dict, path) -> Path:
    """Write per-iteration columns (as produced by
    :func:`proxrate.certify.annotate_trace`) to ``path``."""
    path = Path(path)
    n = len(columns["k"])
    cols = []
    for name in TRACE_COLUMNS:
        col = columns.get(name)
        if col is not None and len(col) != n:
            raise ValueError(f"column {name} has {len(col)} rows, expected {n}")
        cols.append(col)
    buf = _io.StringIO()
    buf.write(",".join(TRACE_COLUMNS) + "\n")
    for i in range(n):
        row = [str(int(cols[0][i]))]
        row += [format_real(None if c is None else c[i]) for c in cols[1:]]
        buf.write(",".join(row) + "\n")
    path.write_text(buf.getvalue())
    return path


def read_trace_csv(path) -> TraceTable:
    text = Path(path).read_text()
    if text and not text.endswith("\n"):
        raise FormatError(f"{path}: last line is incomplete")
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise FormatError(f"{path}: header must be {','.join(TRACE_COLUMNS)}")
    body = rows[1:]
    if not body:
        raise FormatError(f"{path}: no data rows")
    data = {name: [] for name in TRACE_COLUMNS}
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(TRACE_COLUMNS):
            raise FormatError(f"{path}:{lineno}: expected {len(TRACE_COLUMNS)} fields, got {len(row)}")
        try:
            k = int(row[0])
            vals = [float(c) if c != "" else math.nan for c in row[1:]]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
        if k != lineno - 2:
            raise FormatError(f"{path}:{lineno}: expected k={lineno - 2}, got {k}")
        data["k"].append(k)
        for name, v in zip(TRACE_COLUMNS[1:], vals):
            data[name].append(v)
    columns = {"k": np.array(data["k"], dtype=np.int64)}
    for name in TRACE_COLUMNS[1:]:
        col = np.array(data[name], dtype=np.float64)
        columns[name] = None if np.all(np.isnan(col)) else col
    if columns["gs_norm_sq"] is None or np.any(np.isnan(columns["gs_norm_sq"])):
        raise FormatError(f"{path}: gs_norm_sq must be present on every row")
    return TraceTable(columns)


def save_trace(trace: SolverTrace, path) -> Path:
    """Save the full trace, iterates included, as ``.npz``."""
    path = Path(path)
    meta = {
        "method": trace.method,
        "terminated_by": trace.terminated_by,
        "flags": list(trace.flags),
        "metadata": {
            "mu": trace.metadata.mu,
            "lipschitz": trace.metadata.lipschitz,
            "step": trace.metadata.step,
            "lam": trace.metadata.lam,
            "dimension": trace.metadata.dimension,
        },
        "x_is_y": trace.x is trace.y,
    }
    arrays = {"meta": np.array(json.dumps(meta)), "gs_norm_sq": trace.gs_norm_sq}
    for name in ("y", "x", "v", "last_y", "last_x", "last_v"):
        a = getattr(trace, name)
        if a is not None and not (name == "x" and meta["x_is_y"]):
            arrays[name] = a
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_trace(path) -> SolverTrace:
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            arrays = {name: data[name] if name in data else None
                      for name in ("gs_norm_sq", "y", "x", "v", "last_y", "last_x", "last_v")}
    except (OSError, KeyError, ValueError) as exc:
        raise FormatError(f"{path}: not a trace file ({exc})") from None
    if meta.get("x_is_y"):
        arrays["x"] = arrays["y"]
    m = meta["metadata"]
    return SolverTrace(
        method=meta["method"],
        metadata=TraceMetadata(m["mu"], m["lipschitz"], m["step"], m["lam"], m["dimension"]),
        terminated_by=meta["terminated_by"],
        flags=tuple(meta["flags"]),
        **arrays,
    )


def instance_to_dict(problem: LassoProblem) -> dict:
    A = problem.operator
    if A.kind == "tridiagonal":
        op = {"kind": "tridiagonal", "n": A.rows, "diag": A.diag, "offdiag": A.offdiag}
    else:
        op = {"kind": "dense", "rows": A.matrix.tolist()}
    return {
        "operator": op,
        "b": np.asarray(problem.b).tolist(),
        "lambda": problem.lam,
        "mu": problem.mu,
        "L": problem.lipschitz,
    }


def instance_from_dict(d: dict) -> LassoProblem:
    try:
        op = d["operator"]
        if op["kind"] == "tridiagonal":
            A = LinearOperator.tridiagonal(int(op["n"]), float(op["diag"]), float(op["offdiag"]))
        elif op["kind"] == "dense":
            A = LinearOperator.dense(op["rows"])
        else:
            raise FormatError(f"unknown operator kind {op['kind']!r}")
        return make_lasso(A, d["b"], float(d["lambda"]), float(d["mu"]), float(d["L"]))
    except KeyError as exc:
        raise FormatError(f"instance is missing field {exc}") from None


def save_instance(problem: LassoProblem, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(instance_to_dict(problem), indent=1) + "\n")
    return path


def load_instance(path) -> LassoProblem:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    return instance_from_dict(d)


def save_report(report: CertificateReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return path


def load_report(path) -> CertificateReport:
    return CertificateReport.from_dict(json.loads(Path(path).read_text()))


_SERIES = {"gs": ("gs_norm_sq", "envelope_grad"), "obj": ("phi_x_gap", "envelope_obj"), "lyapunov": ("lyapunov", None)}


def plot_series(table: TraceTable, series: str, log10: bool = False):
    """``(k, values, envelope)`` for one series of a trace table.

    ``envelope`` is ``None`` when the table has no matching bound. With
    ``log10`` nonpositive values map to ``-inf``.
    """
    try:
        col, env_col = _SERIES[series]
    except KeyError:
        raise ValueError(f"unknown series {series!r}; expected one of {sorted(_SERIES)}") from None
    values = table[col]
    if values is None:
        raise ValueError(f"series {series!r} is absent from this trace")
    env = table[env_col] if env_col else None
    if log10:
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.where(values > 0, np.log10(np.where(values > 0, values, 1.0)), -np.inf)
            if env is not None:
                env = np.where(env > 0, np.log10(np.where(env > 0, env, 1.0)), -np.inf)
    return table["k"], values, env


def write_plot_data(table: TraceTable, series: str, path, log10: bool = False) -> Path:
    k, values, env = plot_series(table, series, log10)
    label = f"log10_{series}" if log10 else series
    header = ["k", label] + (["envelope"] if env is not None else [])
    lines = [",".join(header)]
    for i in range(len(k)):
        row = [str(int(k[i])), format_real(values[i])]
        if env is not None:
            row.append(format_real(env[i]))
        lines.append(",".join(row))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path
