"""Command-line front end.

Exit codes: 0 success, 1 certification failure, 2 usage or input error,
3 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import experiments, io
from .certify import annotate_trace, certify_trace
from .instances import build_paper_instance
from .problem import condition_number, operator_spectrum, tridiagonal_spectrum
from .solvers import StoppingRule, reference_solution, solve

EXIT_OK = 0
EXIT_CERTIFICATION = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3

_METHOD_NAMES = {"ista": "ista", "fista": "fista_momentum", "fista-phase": "fista_phase_space"}


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _load_problem(args):
    if args.paper and args.instance:
        raise CliError("give either --paper or --instance, not both")
    if args.paper:
        inst = build_paper_instance()
        return inst.problem, inst.step
    if args.instance:
        try:
            return io.load_instance(args.instance), None
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot load instance: {exc}") from None
    raise CliError("one of --instance or --paper is required")


def resolve_step(step: str, method: str, L: float, certify_gradient: bool = False) -> float:
    """``auto`` means ``1/L``, or ``1/(2L)`` for FISTA when its gradient bound
    (which needs ``s < 1/L``) is to be certified."""
    if step == "auto":
        if certify_gradient and method != "ista":
            return 0.5 / L
        return 1.0 / L
    try:
        s = float(step)
    except ValueError:
        raise CliError(f"--step must be a number or 'auto', got {step!r}") from None
    if not s > 0:
        raise CliError("--step must be positive")
    return s


def cmd_solve(args) -> int:
    problem, _ = _load_problem(args)
    method = _METHOD_NAMES[args.method]
    s = resolve_step(args.step, method, problem.lipschitz, args.certify_gradient)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out}: {exc}") from None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        trace = solve(method, problem, np.zeros(problem.dimension), s, StoppingRule(args.max_iters, args.grad_tol))
    ref = reference_solution(problem, tol=args.reference_tol)
    columns = annotate_trace(problem, trace, ref.x, ref.phi)
    csv_path = io.write_trace_csv(columns, out / f"{args.method}_trace.csv")
    io.save_trace(trace, out / f"{args.method}_trace.npz")
    gap = columns["phi_x_gap"]
    gap_text = "n/a" if gap is None else f"{gap[-1]:.6e}"
    print(f"method={method} step={s:.6g} k={trace.iterations} terminated_by={trace.terminated_by}")
    print(f"gs_norm_sq={trace.gs_norm_sq[-1]:.6e} phi_gap={gap_text}")
    print(f"trace: {csv_path}")
    return EXIT_DIVERGED if trace.diverged else EXIT_OK


def _load_trace_for_certify(path: Path):
    if path.suffix == ".csv":
        table = io.read_trace_csv(path)
        npz = path.with_suffix(".npz")
        if not npz.exists():
            raise CliError(f"{path}: iterates file {npz.name} not found next to the CSV")
        trace = io.load_trace(npz)
        if len(table) != len(trace) or not np.array_equal(table["gs_norm_sq"], trace.gs_norm_sq):
            raise CliError(f"{path} does not match {npz.name} (truncated or edited?)")
        return trace
    return io.load_trace(path)


def cmd_certify(args) -> int:
    trace_path = Path(args.trace)
    try:
        trace = _load_trace_for_certify(trace_path)
        problem = io.load_instance(args.instance)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from None
    meta = trace.metadata
    if meta.dimension != problem.dimension:
        raise CliError(f"trace dimension {meta.dimension} does not match instance dimension {problem.dimension}")
    if (meta.mu, meta.lipschitz) != (problem.mu, problem.lipschitz) or (
        meta.lam is not None and meta.lam != problem.lam
    ):
        raise CliError("trace was produced on a different instance (mu, L or lambda differ)")
    ref = reference_solution(problem)
    report = certify_trace(problem, trace, ref.x, ref.phi)
    report_path = Path(args.report) if args.report else trace_path.with_name(trace_path.stem + "_certificate.json")
    io.save_report(report, report_path)
    for check in report.checks.values():
        mark = "PASS" if check.passed else "FAIL"
        print(f"{mark} {check.name}: tested={check.tested} worst_slack={check.worst_slack:.3e} at k={check.worst_index}")
    print(f"status: {report.status}" + (f" ({report.reason})" if report.reason else ""))
    return EXIT_OK if report.passed else EXIT_CERTIFICATION


def cmd_spectrum(args) -> int:
    if bool(args.tridiagonal) == bool(args.instance):
        raise CliError("give exactly one of --tridiagonal n,d,o or --instance PATH")
    if args.tridiagonal:
        try:
            n_text, d_text, o_text = args.tridiagonal.split(",")
            n = int(n_text)
            mu, L = tridiagonal_spectrum(n, float(d_text), float(o_text))
        except ValueError as exc:
            raise CliError(f"--tridiagonal expects n,diag,offdiag: {exc}") from None
    else:
        try:
            problem = io.load_instance(args.instance)
            mu, L = operator_spectrum(problem.operator)
        except (OSError, ValueError) as exc:
            raise CliError(str(exc)) from None
    print(f"mu = {mu:.6g}")
    print(f"L = {L:.6g}")
    print(f"cond = {condition_number(mu, L):.6g}")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    try:
        table = io.read_trace_csv(args.trace)
        io.write_plot_data(table, args.series, args.out, log10=args.log10)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from None
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        config = experiments.ExperimentConfig.from_json(args.config)
        files = experiments.run_experiment(config)
    except OSError as exc:
        raise CliError(str(exc)) from None
    except experiments.ConfigError as exc:
        raise CliError(str(exc)) from None
    for key, path in files.items():
        print(f"{key}: {path}")
    summary = json.loads(files["summary"].read_text())
    statuses = [v["terminated_by"] for v in summary["solvers"].values()]
    if "diverged" in statuses:
        return EXIT_DIVERGED
    if any(v["certificate"] == "failed" for v in summary["solvers"].values()):
        return EXIT_CERTIFICATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxrate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run a solver and write its trace")
    p.add_argument("--instance", help="instance JSON file")
    p.add_argument("--paper", action="store_true", help="use the 500x500 tridiagonal instance")
    p.add_argument("--method", choices=sorted(_METHOD_NAMES), required=True)
    p.add_argument("--step", default="auto", help="positive real or 'auto'")
    p.add_argument("--certify-gradient", action="store_true",
                   help="with --step auto, pick 1/(2L) for FISTA so its gradient bound applies")
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--grad-tol", type=float, default=0.0)
    p.add_argument("--reference-tol", type=_positive_float, default=1e-13)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="check a trace against its rate bounds")
    p.add_argument("--trace", required=True, help="trace .csv (with sibling .npz) or .npz")
    p.add_argument("--instance", required=True)
    p.add_argument("--report", help="report JSON path (default: next to the trace)")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("spectrum", help="print mu, L and L/mu")
    p.add_argument("--tridiagonal", metavar="N,DIAG,OFFDIAG")
    p.add_argument("--instance")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("plotdata", help="extract one series of a trace CSV for plotting")
    p.add_argument("--trace", required=True)
    p.add_argument("--series", choices=("gs", "obj", "lyapunov"), required=True)
    p.add_argument("--log10", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser("experiment", help="run an experiment config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "max_iters", 1) < 1:
        parser.error("--max-iters must be at least 1")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"proxrate {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
