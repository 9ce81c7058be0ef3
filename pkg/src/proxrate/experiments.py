"""Experiment orchestration: build an instance, compute a reference solution,
run the configured solvers and write traces, certificates, plot data and a
comparison summary."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .certify import annotate_trace, certify_trace
from .instances import build_paper_instance, build_random_lasso, build_tridiagonal_lasso
from .io import load_instance, save_instance, save_report, save_trace, write_plot_data, write_trace_csv, TraceTable
from .problem import LassoProblem
from .solvers import METHODS, SolverTrace, StoppingRule, reference_solution, solve

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "DEFAULT_THRESHOLDS",
    "build_instance",
    "run_experiment",
    "tail_rate_estimate",
    "iterations_to_threshold",
]

DEFAULT_THRESHOLDS = (1e-4, 1e-8, 1e-12)

_INSTANCE_TYPES = ("benchmark", "tridiagonal", "random_lasso", "file")


class ConfigError(ValueError):
    """An experiment configuration is invalid."""


@dataclass
class ExperimentConfig:
    """What to run and where to write it.

    ``instance`` is a dict with a ``type`` key: ``benchmark`` (the 500 x 500 tridiagonal lasso), ``tridiagonal``
    (``n, diag, offdiag, b_fill, lambda``), ``random_lasso``
    (``m, d, mu_target, L_target, seed, lambda``) or ``file`` (``path``).
    ``step`` is a positive real or ``"one_over_L"``; ``x0`` is ``"zeros"`` or
    ``{"file": path}`` pointing at a JSON list or ``.npy`` array.
    """

    instance: dict
    solvers: list
    output_dir: Union[str, Path]
    step: Union[float, str] = "one_over_L"
    x0: Union[str, dict] = "zeros"
    stop: StoppingRule = field(default_factory=lambda: StoppingRule(10000, 0.0))
    reference_tol: float = 1e-13
    thresholds: tuple = DEFAULT_THRESHOLDS

    def __post_init__(self):
        if not self.solvers:
            raise ConfigError("at least one solver is required")
        for name in self.solvers:
            if name not in METHODS:
                raise ConfigError(f"unknown solver {name!r}; expected one of {METHODS}")
        if self.instance.get("type") not in _INSTANCE_TYPES:
            raise ConfigError(f"instance type must be one of {_INSTANCE_TYPES}")
        if isinstance(self.step, str):
            if self.step != "one_over_L":
                raise ConfigError("step must be a positive number or 'one_over_L'")
        elif not self.step > 0:
            raise ConfigError("step must be positive")
        if not (self.x0 == "zeros" or (isinstance(self.x0, dict) and "file" in self.x0)):
            raise ConfigError("x0 must be 'zeros' or {'file': path}")
        if not self.reference_tol > 0:
            raise ConfigError("reference_tol must be positive")
        self.output_dir = Path(self.output_dir)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - {"instance", "solvers", "output_dir", "step", "x0", "stop", "reference_tol", "thresholds"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        stop = d.pop("stop", {})
        try:
            d["stop"] = StoppingRule(int(stop.get("max_iters", 10000)), float(stop.get("grad_tol", 0.0)))
            if "thresholds" in d:
                d["thresholds"] = tuple(float(t) for t in d["thresholds"])
            return cls(**d)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def build_instance(desc: dict) -> tuple[LassoProblem, Optional[float]]:
    """Problem for an instance description, plus its customary step if it has one."""
    kind = desc.get("type")
    try:
        if kind == "benchmark":
            inst = build_paper_instance()
            return inst.problem, inst.step
        if kind == "tridiagonal":
            return build_tridiagonal_lasso(int(desc["n"]), float(desc.get("diag", 2.0)),
                                           float(desc.get("offdiag", 1.0)), float(desc.get("b_fill", 1.0)),
                                           float(desc["lambda"])), None
        if kind == "random_lasso":
            return build_random_lasso(int(desc["m"]), int(desc["d"]), float(desc["mu_target"]),
                                      float(desc["L_target"]), int(desc["seed"]), float(desc["lambda"])), None
        if kind == "file":
            return load_instance(desc["path"]), None
    except KeyError as exc:
        raise ConfigError(f"instance description is missing {exc}") from None
    raise ConfigError(f"unknown instance type {kind!r}")


def _resolve_x0(x0, dimension: int) -> np.ndarray:
    if x0 == "zeros":
        return np.zeros(dimension)
    path = Path(x0["file"])
    arr = np.load(path) if path.suffix == ".npy" else np.array(json.loads(path.read_text()), dtype=np.float64)
    if arr.shape != (dimension,):
        raise ConfigError(f"x0 from {path} has shape {arr.shape}, expected ({dimension},)")
    return arr


def iterations_to_threshold(gs_norm_sq, threshold: float) -> Optional[int]:
    hit = np.flatnonzero(np.asarray(gs_norm_sq) <= threshold)
    return int(hit[0]) if hit.size else None


def tail_rate_estimate(trace) -> float:
    """Per-iteration contraction ratio of ``||G_s(y_k)||^2`` over the last half
    of a trace.

    Fits a least-squares line to ``log(gs_norm_sq)`` against ``k`` and returns
    ``exp(slope)``. If the series reaches exactly zero only the strictly
    positive prefix is used, with a warning. Accepts a :class:`SolverTrace`,
    a trace table or a plain sequence.
    """
    if isinstance(trace, (SolverTrace, TraceTable)):
        series = np.asarray(trace.gs_norm_sq if isinstance(trace, SolverTrace) else trace["gs_norm_sq"])
    else:
        series = np.asarray(trace, dtype=np.float64)
    if series.size < 20:
        raise ValueError("need at least 20 records to estimate a tail rate")
    nonpos = np.flatnonzero(series <= 0)
    if nonpos.size:
        warnings.warn(f"series hits zero at k={nonpos[0]}; fitting the positive prefix only",
                      RuntimeWarning, stacklevel=2)
        series = series[: nonpos[0]]
        if series.size < 4:
            raise ValueError("too few positive values to fit")
    start = series.size // 2
    k = np.arange(start, series.size, dtype=np.float64)
    slope = np.polyfit(k, np.log(series[start:]), 1)[0]
    return float(np.exp(slope))


def _check_writable(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from None


def run_experiment(config: ExperimentConfig) -> dict:
    """Run every configured solver and write its files under ``output_dir``.

    Per solver ``<name>_trace.csv``, ``<name>_trace.npz``,
    ``<name>_certificate.json`` and ``<name>_plot.csv`` (``k, gs, envelope``);
    plus ``instance.json`` and ``summary.json``. Returns a mapping from a
    short key to each written path.
    """
    out = config.output_dir
    _check_writable(out)
    problem, _ = build_instance(config.instance)
    s = 1.0 / problem.lipschitz if config.step == "one_over_L" else float(config.step)
    x0 = _resolve_x0(config.x0, problem.dimension)
    ref = reference_solution(problem, tol=config.reference_tol)

    files = {"instance": save_instance(problem, out / "instance.json")}
    summary = {
        "step": s,
        "mu": problem.mu,
        "L": problem.lipschitz,
        "dimension": problem.dimension,
        "reference": {"residual": ref.residual, "converged": ref.converged, "phi": ref.phi},
        "thresholds": list(config.thresholds),
        "solvers": {},
    }
    for name in config.solvers:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            trace = solve(name, problem, x0, s, config.stop)
        columns = annotate_trace(problem, trace, ref.x, ref.phi)
        files[f"{name}_trace"] = write_trace_csv(columns, out / f"{name}_trace.csv")
        files[f"{name}_npz"] = save_trace(trace, out / f"{name}_trace.npz")
        report = certify_trace(problem, trace, ref.x, ref.phi)
        files[f"{name}_certificate"] = save_report(report, out / f"{name}_certificate.json")
        table = TraceTable(dict(columns))
        files[f"{name}_plot"] = write_plot_data(table, "gs", out / f"{name}_plot.csv")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                rate = tail_rate_estimate(trace)
        except ValueError:
            rate = None
        summary["solvers"][name] = {
            "iterations_to_threshold": {
                format(t, "g"): iterations_to_threshold(trace.gs_norm_sq, t) for t in config.thresholds
            },
            "iterations": trace.iterations,
            "terminated_by": trace.terminated_by,
            "final_gs_norm_sq": float(trace.gs_norm_sq[-1]),
            "tail_rate": rate,
            "certificate": report.status,
        }
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    files["summary"] = path
    return files
