"""ISTA and strongly convex FISTA with full iterate traces.

Three solvers share one calling convention::

    trace = ista(problem, x0, s, StoppingRule(max_iters=1000, grad_tol=1e-12))

Every iteration evaluates the proximal map once, at the point ``y_k``, and
records ``||G_s(y_k)||^2``. FISTA uses the momentum coefficient
``1 / (1 + 2 sqrt(mu s))`` and is available both in its two-line momentum
form and in the position/velocity form. The two forms produce the same
iterates up to rounding.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .problem import DENSE_SPECTRUM_MAX_DIM, CompositeProblem, LassoProblem

__all__ = [
    "METHODS",
    "StoppingRule",
    "IterateRecord",
    "TraceMetadata",
    "SolverTrace",
    "ReferenceSolution",
    "ista",
    "fista_momentum",
    "fista_phase_space",
    "solve",
    "reference_solution",
    "momentum_coefficient",
    "step_within_inverse_lipschitz",
]

METHODS = ("ista", "fista_momentum", "fista_phase_space")

# relative slack when comparing a step against 1/L, so that s = 1.0 / L passes
_STEP_RTOL = 1e-12


def step_within_inverse_lipschitz(s: float, L: float, strict: bool = False) -> bool:
    if strict:
        return s * L < 1.0 - _STEP_RTOL
    return s * L <= 1.0 + _STEP_RTOL


def momentum_coefficient(mu: float, s: float) -> float:
    return 1.0 / (1.0 + 2.0 * math.sqrt(mu * s))


@dataclass(frozen=True)
class StoppingRule:
    """Stop after ``max_iters`` updates or once ``||G_s(y_k)||^2 <= grad_tol``."""

    max_iters: int = 10000
    grad_tol: float = 0.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be nonnegative")


@dataclass(frozen=True, eq=False)
class IterateRecord:
    k: int
    y: Optional[np.ndarray]
    x: Optional[np.ndarray]
    v: Optional[np.ndarray]
    gs_norm_sq: float
    step: float
    objective_gap_x: Optional[float] = None


@dataclass(frozen=True)
class TraceMetadata:
    mu: float
    lipschitz: float
    step: float
    lam: Optional[float]
    dimension: int


@dataclass(eq=False)
class SolverTrace:
    """Iterates of one solver run, stored row-wise (row ``k`` is iteration ``k``).

    ``y``, ``x`` and ``v`` are ``None`` when the run was made with
    ``keep_iterates=False``; the final point is always kept in ``last_x``,
    ``last_y`` and ``last_v``.
    """

    method: str
    metadata: TraceMetadata
    gs_norm_sq: np.ndarray
    terminated_by: str
    y: Optional[np.ndarray] = None
    x: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    last_y: Optional[np.ndarray] = None
    last_x: Optional[np.ndarray] = None
    last_v: Optional[np.ndarray] = None
    flags: tuple = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.gs_norm_sq)

    @property
    def k(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def step(self) -> float:
        return self.metadata.step

    @property
    def iterations(self) -> int:
        return len(self) - 1

    @property
    def has_iterates(self) -> bool:
        return self.y is not None

    @property
    def diverged(self) -> bool:
        return self.terminated_by == "diverged"

    def record(self, k: int) -> IterateRecord:
        if k < 0:
            k += len(self)

        def row(a):
            return None if a is None else a[k]

        return IterateRecord(k, row(self.y), row(self.x), row(self.v), float(self.gs_norm_sq[k]), self.step)

    @property
    def records(self) -> list[IterateRecord]:
        return [self.record(k) for k in range(len(self))]

    def iterations_to(self, threshold: float) -> Optional[int]:
        """First ``k`` with ``gs_norm_sq[k] <= threshold``, or ``None``."""
        hit = np.flatnonzero(self.gs_norm_sq <= threshold)
        return int(hit[0]) if hit.size else None

    def __eq__(self, other) -> bool:
        if not isinstance(other, SolverTrace):
            return NotImplemented
        if (self.method, self.metadata, self.terminated_by, tuple(self.flags)) != (
            other.method, other.metadata, other.terminated_by, tuple(other.flags)
        ):
            return False
        for name in ("gs_norm_sq", "y", "x", "v", "last_y", "last_x", "last_v"):
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True


class _Recorder:
    def __init__(self, keep_iterates: bool, with_velocity: bool, separate_x: bool):
        self.keep = keep_iterates
        self.with_velocity = with_velocity
        self.separate_x = separate_x
        self.gs: list[float] = []
        self.ys: list[np.ndarray] = []
        self.xs: list[np.ndarray] = []
        self.vs: list[np.ndarray] = []
        self.last = (None, None, None)

    def add(self, y, x, v, gs_norm_sq):
        self.gs.append(gs_norm_sq)
        self.last = (y, x, v)
        if self.keep:
            self.ys.append(y)
            if self.separate_x:
                self.xs.append(x)
            if self.with_velocity:
                self.vs.append(v)

    def build(self, method, metadata, terminated_by, flags) -> SolverTrace:
        last_y, last_x, last_v = self.last
        y = x = v = None
        if self.keep:
            y = np.array(self.ys)
            x = np.array(self.xs) if self.separate_x else y
            v = np.array(self.vs) if self.with_velocity else None
        return SolverTrace(
            method=method,
            metadata=metadata,
            gs_norm_sq=np.array(self.gs, dtype=np.float64),
            terminated_by=terminated_by,
            y=y,
            x=x,
            v=v,
            last_y=last_y,
            last_x=last_x,
            last_v=last_v,
            flags=tuple(flags),
        )


def _prepare(problem: CompositeProblem, x0, s: float, method: str):
    if not s > 0:
        raise ValueError("step must be positive")
    x0 = problem.check_point(x0).copy()
    flags = []
    if not step_within_inverse_lipschitz(s, problem.lipschitz):
        warnings.warn(
            f"{method}: step {s:g} exceeds 1/L = {1 / problem.lipschitz:g}; "
            "convergence guarantees do not apply",
            RuntimeWarning,
            stacklevel=4,
        )
        flags.append("step_exceeds_inverse_lipschitz")
    lam = getattr(problem, "lam", None)
    meta = TraceMetadata(problem.mu, problem.lipschitz, float(s), lam, problem.dimension)
    return x0, meta, flags


def _quiet_overflow(fn):
    # divergence is reported through terminated_by, not floating-point warnings
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with np.errstate(over="ignore", invalid="ignore"):
            return fn(*args, **kwargs)

    return wrapper


def _forward_backward(problem, y, s):
    p = problem.nonsmooth.prox(y - s * problem.smooth.gradient(y), s)
    g = (y - p) / s
    return p, float(g @ g)


def _status(k, gs, p, stop):
    if not (math.isfinite(gs) and np.all(np.isfinite(p))):
        return "diverged"
    if gs <= stop.grad_tol:
        return "tolerance"
    if k == stop.max_iters:
        return "max_iters"
    return None


@_quiet_overflow
def ista(problem: CompositeProblem, x0, s: float, stop: StoppingRule = StoppingRule(),
         keep_iterates: bool = True) -> SolverTrace:
    """Proximal gradient descent ``y_{k+1} = y_k - s G_s(y_k)`` from ``y_0 = x0``."""
    y, meta, flags = _prepare(problem, x0, s, "ista")
    rec = _Recorder(keep_iterates, with_velocity=False, separate_x=False)
    for k in range(stop.max_iters + 1):
        p, gs = _forward_backward(problem, y, s)
        rec.add(y, y, None, gs)
        status = _status(k, gs, p, stop)
        if status:
            break
        y = p
    return rec.build("ista", meta, status, flags)


@_quiet_overflow
def fista_momentum(problem: CompositeProblem, x0, s: float, stop: StoppingRule = StoppingRule(),
                   keep_iterates: bool = True) -> SolverTrace:
    """FISTA as ``x_k = P_s(y_{k-1})``, ``y_k = x_k + c (x_k - x_{k-1})`` with
    ``c = 1 / (1 + 2 sqrt(mu s))`` and ``y_0 = x_0``."""
    x, meta, flags = _prepare(problem, x0, s, "fista_momentum")
    if problem.mu == 0:
        flags.append("zero_mu_constant_momentum")
    c = momentum_coefficient(problem.mu, s)
    y = x
    rec = _Recorder(keep_iterates, with_velocity=False, separate_x=True)
    for k in range(stop.max_iters + 1):
        p, gs = _forward_backward(problem, y, s)
        rec.add(y, x, None, gs)
        status = _status(k, gs, p, stop)
        if status:
            break
        x_prev, x = x, p
        y = x + c * (x - x_prev)
    return rec.build("fista_momentum", meta, status, flags)


@_quiet_overflow
def fista_phase_space(problem: CompositeProblem, x0, s: float, stop: StoppingRule = StoppingRule(),
                      keep_iterates: bool = True) -> SolverTrace:
    """FISTA in position/velocity form with ``v_0 = 0``::

        y_k     = x_k + sqrt(s) v_k / (1 + 2 sqrt(mu s))
        v_{k+1} = v_k - 2 sqrt(mu s) v_k / (1 + 2 sqrt(mu s)) - sqrt(s) G_s(y_k)
        x_{k+1} = x_k + sqrt(s) v_{k+1}
    """
    x, meta, flags = _prepare(problem, x0, s, "fista_phase_space")
    if problem.mu == 0:
        flags.append("zero_mu_constant_momentum")
    root_s = math.sqrt(s)
    a = math.sqrt(problem.mu * s)
    damp = 1.0 + 2.0 * a
    v = np.zeros_like(x)
    rec = _Recorder(keep_iterates, with_velocity=True, separate_x=True)
    for k in range(stop.max_iters + 1):
        y = x + root_s * v / damp
        p, gs = _forward_backward(problem, y, s)
        rec.add(y, x, v, gs)
        status = _status(k, gs, p, stop)
        if status:
            break
        g = (y - p) / s
        v = v - 2.0 * a * v / damp - root_s * g
        x = x + root_s * v
    return rec.build("fista_phase_space", meta, status, flags)


_SOLVERS = {"ista": ista, "fista_momentum": fista_momentum, "fista_phase_space": fista_phase_space}


def solve(method: str, problem: CompositeProblem, x0, s: float, stop: StoppingRule = StoppingRule(),
          keep_iterates: bool = True) -> SolverTrace:
    try:
        fn = _SOLVERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}") from None
    return fn(problem, x0, s, stop, keep_iterates=keep_iterates)


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    """Surrogate for the minimizer.

    ``residual`` is ``||G_s(x)||`` at ``step``; ``converged`` says whether it
    reached the requested tolerance.
    """

    x: np.ndarray
    phi: float
    residual: float
    step: float
    converged: bool
    iterations: int
    polished: bool = False


def _residual(problem, x, s) -> float:
    _, gs = _forward_backward(problem, x, s)
    return math.sqrt(gs)


def _polish_lasso(problem: LassoProblem, x, s, tol, max_rounds=50):
    """Active-set refinement: fix the support and signs read off the forward
    point, solve the reduced least-squares system exactly, repeat."""
    A = problem.operator.to_dense()
    b = np.asarray(problem.b)
    lam = problem.lam
    best, best_res = x, _residual(problem, x, s)
    for _ in range(max_rounds):
        z = x - s * problem.smooth.gradient(x)
        support = np.abs(z) > lam * s
        xn = np.zeros_like(x)
        if support.any():
            if support.sum() > A.shape[0]:
                break
            Q, R = np.linalg.qr(A[:, support])
            if np.any(np.abs(np.diag(R)) == 0):
                break
            w = solve_triangular(R, np.sign(z[support]), trans="T")
            xn[support] = solve_triangular(R, Q.T @ b - lam * w)
        res = _residual(problem, xn, s)
        if res < best_res:
            best, best_res = xn, res
        if res <= tol or np.array_equal(xn, x):
            break
        x = xn
    return best, best_res


def reference_solution(problem: CompositeProblem, tol: float = 1e-13, max_iters: int = 20000,
                       x0=None, polish: bool = True) -> ReferenceSolution:
    """High-accuracy minimizer surrogate.

    Runs momentum FISTA with step ``0.99 / L`` until ``||G_s|| <= tol``. For
    lasso problems of moderate size the result is then refined by an
    active-set solve, which is what makes badly conditioned instances
    tractable. The returned point is the one with the smallest residual.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    s = 0.99 / problem.lipschitz
    x0 = np.zeros(problem.dimension) if x0 is None else x0
    trace = fista_momentum(problem, x0, s, StoppingRule(max_iters, tol * tol), keep_iterates=False)
    res, x = min(
        ((_residual(problem, c, s), c) for c in (trace.last_y, trace.last_x)),
        key=lambda pair: pair[0],
    )
    polished = False
    if (
        polish
        and res > tol
        and isinstance(problem, LassoProblem)
        and problem.dimension <= DENSE_SPECTRUM_MAX_DIM
    ):
        xp, rp = _polish_lasso(problem, x, s, tol)
        if rp < res:
            x, res, polished = xp, rp, True
    x = np.array(x)
    return ReferenceSolution(
        x=x,
        phi=problem.objective(x),
        residual=res,
        step=s,
        converged=res <= tol,
        iterations=trace.iterations,
        polished=polished,
    )
