"""Rate envelopes, Lyapunov sequences and pointwise inequality checks.

Everything here compares an observed quantity against an upper bound and
reports a *signed slack* (bound minus observed). Slacks are never clamped.
The exact minimizer is replaced by a :class:`~proxrate.solvers.ReferenceSolution`,
whose residual ``r = ||G_s(x_ref)||`` enters every trace check as an absolute
allowance ``r * (||y_k - x_ref|| + 1)`` on top of a relative tolerance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .prox import prox_subgradient
from .solvers import SolverTrace, step_within_inverse_lipschitz

__all__ = [
    "REL_TOL",
    "RateHypothesisError",
    "RateEnvelope",
    "IstaEnvelopes",
    "FistaEnvelopes",
    "CheckResult",
    "CertificateReport",
    "check_strong_gap",
    "check_pivotal",
    "ista_envelopes",
    "fista_envelopes",
    "ista_rate",
    "fista_lyapunov_factor",
    "ista_lyapunov",
    "fista_lyapunov",
    "objective_gaps",
    "certify_trace",
    "inequality_suite",
    "annotate_trace",
]

REL_TOL = 1e-8


class RateHypothesisError(ValueError):
    """The step size or curvature data violate the hypothesis of a rate bound."""


@dataclass(frozen=True)
class RateEnvelope:
    """Geometric upper bound ``C * ratio**k`` (``form="power"``) or
    ``C / (1 + beta)**k`` (``form="inverse_power"``)."""

    constant: float
    ratio: float
    form: str = "power"
    beta: Optional[float] = None

    def __post_init__(self):
        if self.constant < 0:
            raise ValueError("envelope constant must be nonnegative")
        if not 0 <= self.ratio <= 1:
            raise ValueError("envelope ratio must lie in [0, 1]")

    @classmethod
    def inverse_power(cls, constant: float, beta: float) -> "RateEnvelope":
        return cls(constant, 1.0 / (1.0 + beta), "inverse_power", beta)

    def evaluate(self, k):
        k = np.asarray(k, dtype=np.float64)
        if self.form == "inverse_power":
            out = self.constant / (1.0 + self.beta) ** k
        else:
            out = self.constant * self.ratio**k
        return float(out) if out.ndim == 0 else out


class IstaEnvelopes(NamedTuple):
    objective: RateEnvelope
    gradient: RateEnvelope


class FistaEnvelopes(NamedTuple):
    objective: RateEnvelope
    gradient: Optional[RateEnvelope]
    simplified_objective: RateEnvelope
    simplified_gradient: Optional[RateEnvelope]


def ista_rate(mu: float, s: float) -> float:
    return (1.0 - mu * s) / (1.0 + mu * s)


def ista_envelopes(s: float, mu: float, L: float, dist0_sq: float) -> IstaEnvelopes:
    """Bounds on ``Phi(y_k) - Phi*`` and ``||G_s(y_k)||^2`` for ISTA, where
    ``dist0_sq = ||x_0 - x*||^2``. Requires ``0 < s <= 1/L``."""
    if not s > 0 or not step_within_inverse_lipschitz(s, L):
        raise RateHypothesisError(f"ISTA bounds need 0 < s <= 1/L; got s={s:g}, 1/L={1 / L:g}")
    if not 0 <= mu <= L or dist0_sq < 0:
        raise ValueError("need 0 <= mu <= L and dist0_sq >= 0")
    rho = ista_rate(mu, s)
    return IstaEnvelopes(RateEnvelope(dist0_sq / s, rho), RateEnvelope(4.0 * dist0_sq / s**2, rho))


def fista_envelopes(s: float, mu: float, L: float, phi_gap0: float, dist0_sq: float) -> FistaEnvelopes:
    """Bounds on ``Phi(x_k) - Phi*`` and ``||G_s(y_k)||^2`` for FISTA.

    Both decay like ``(1 + sqrt(mu s) / 4)**-k``. The gradient bounds carry
    a ``1 / (1 - sL)`` factor and are ``None`` (with a warning) at
    ``s = 1/L``. The ``simplified_*`` pair replaces the initial energy
    ``phi_gap0 + mu * dist0_sq`` by a multiple of ``dist0_sq`` alone.
    """
    if not s > 0 or not step_within_inverse_lipschitz(s, L):
        raise RateHypothesisError(f"FISTA bounds need 0 < s <= 1/L; got s={s:g}, 1/L={1 / L:g}")
    if not 0 <= mu <= L or dist0_sq < 0 or phi_gap0 < 0:
        raise ValueError("need 0 <= mu <= L and nonnegative initial gaps")
    beta = math.sqrt(mu * s) / 4.0
    energy0 = phi_gap0 + mu * dist0_sq
    objective = RateEnvelope.inverse_power(energy0, beta)
    simplified_objective = RateEnvelope.inverse_power(11.0 * dist0_sq / (2.0 * s), beta)
    if step_within_inverse_lipschitz(s, L, strict=True):
        slack = 1.0 - s * L
        gradient = RateEnvelope.inverse_power(2.0 * energy0 / (s * slack), beta)
        simplified_gradient = RateEnvelope.inverse_power(11.0 * dist0_sq / (s**2 * slack), beta)
    else:
        warnings.warn(
            "gradient bound is singular at s = 1/L (factor 1/(1 - sL)); returning objective bounds only",
            RuntimeWarning,
            stacklevel=2,
        )
        gradient = simplified_gradient = None
    return FistaEnvelopes(objective, gradient, simplified_objective, simplified_gradient)


def fista_lyapunov_factor(mu: float, s: float, simplified: bool = False) -> float:
    """Per-step decay factor ``q`` with ``q * E(k+1) <= E(k)``.

    The default is ``1 + a * min{1, (1 + a) / (3/4 + a + a^2), 1/4}`` with
    ``a = sqrt(mu s)``; ``simplified=True`` gives ``1 + a / 4``.
    """
    a = math.sqrt(mu * s)
    if simplified:
        return 1.0 + a / 4.0
    return 1.0 + a * min(1.0, (1.0 + a) / (0.75 + a + a * a), 0.25)


def _gap(problem, x, x_ref, phi_ref) -> float:
    # Phi(x) - phi_ref without cancellation when the oracles allow it
    return problem.objective_difference(x, x_ref) + (problem.objective(x_ref) - phi_ref)


def check_strong_gap(problem, x, x_ref, phi_ref: float, with_scale: bool = False):
    """Slack of ``Phi(x) - Phi* >= (mu/2) ||x - x*||^2``."""
    x = problem.check_point(x)
    gap = _gap(problem, x, x_ref, phi_ref)
    d = x - x_ref
    quad = 0.5 * problem.mu * float(d @ d)
    slack = gap - quad
    if with_scale:
        return slack, 1.0 + abs(gap) + quad + abs(phi_ref)
    return slack


def check_pivotal(problem, x, y, s: float, mu: Optional[float] = None, with_scale: bool = False):
    """Slack of the step-scaled pivotal inequality::

        Phi(y - s G) <= Phi(x) + <G, y - x> - (s - s^2 L / 2) ||G||^2 - (mu/2) ||y - x||^2

    with ``G = G_s(y)``. ``mu`` overrides the problem's modulus (``mu=0``
    gives the convex form).
    """
    mu = problem.mu if mu is None else mu
    x = problem.check_point(x)
    ev = prox_subgradient(problem, y, s)
    g = ev.subgradient
    d = ev.input_point - x
    g2 = float(g @ g)
    inner = float(g @ d)
    curv = (s - 0.5 * s * s * problem.lipschitz) * g2
    quad = 0.5 * mu * float(d @ d)
    # RHS - LHS = (Phi(x) - Phi(P)) + <G, y-x> - curv - quad
    slack = problem.objective_difference(x, ev.mapped_point) + inner - curv - quad
    if with_scale:
        scale = 1.0 + abs(problem.objective(x)) + abs(problem.objective(ev.mapped_point)) + abs(inner) + abs(curv) + quad
        return slack, scale
    return slack


def objective_gaps(problem, points, x_ref, phi_ref) -> np.ndarray:
    return np.array([_gap(problem, p, x_ref, phi_ref) for p in points])


def ista_lyapunov(trace: SolverTrace, x_ref) -> np.ndarray:
    """``E(k) = ||y_k - x_ref||^2`` along an ISTA trace."""
    if trace.method != "ista":
        raise ValueError("ista_lyapunov needs an ISTA trace")
    _require_iterates(trace)
    d = trace.y - x_ref
    return np.einsum("ij,ij->i", d, d)


def fista_lyapunov(problem, trace: SolverTrace, x_ref, phi_ref: float) -> np.ndarray:
    """``E(k) = Phi(x_k) - Phi* + ||v_k||^2 / (4 (1 + 2a)^2) + ||v_k + 2 sqrt(mu) (x_k - x*)||^2 / 4``
    along a position/velocity FISTA trace, ``a = sqrt(mu s)``."""
    if trace.v is None:
        raise ValueError("fista_lyapunov needs a trace with velocities (fista_phase_space)")
    s = trace.step
    mu = trace.metadata.mu
    damp = 1.0 + 2.0 * math.sqrt(mu * s)
    pot = objective_gaps(problem, trace.x, x_ref, phi_ref)
    kin = np.einsum("ij,ij->i", trace.v, trace.v) / (4.0 * damp**2)
    mixed = trace.v + 2.0 * math.sqrt(mu) * (trace.x - x_ref)
    mix = np.einsum("ij,ij->i", mixed, mixed) / 4.0
    return pot + kin + mix


def _require_iterates(trace):
    if not trace.has_iterates:
        raise ValueError("trace was recorded without iterates")


@dataclass(frozen=True)
class CheckResult:
    name: str
    tested: int
    worst_slack: float
    worst_index: int
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "tested": self.tested,
            "worst_slack": self.worst_slack,
            "worst_index": self.worst_index,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }

    @classmethod
    def from_dict(cls, name, d) -> "CheckResult":
        return cls(name, int(d["tested"]), float(d["worst_slack"]), int(d["worst_index"]),
                   float(d["tolerance"]), bool(d["pass"]))


def _evaluate_check(name: str, slack, allowance) -> CheckResult:
    """``pass`` iff ``slack >= -allowance`` everywhere; the reported item is the
    one with the smallest margin ``slack + allowance``."""
    slack = np.asarray(slack, dtype=np.float64)
    allowance = np.broadcast_to(np.asarray(allowance, dtype=np.float64), slack.shape)
    margin = np.where(np.isfinite(slack + allowance), slack + allowance, -np.inf)
    i = int(np.argmin(margin))
    return CheckResult(
        name=name,
        tested=int(slack.size),
        worst_slack=float(slack[i]),
        worst_index=i,
        tolerance=float(allowance[i]),
        passed=bool(np.all(margin >= 0)),
    )


_RESERVED = ("tolerance_policy", "reference_residual", "status", "reason")


@dataclass
class CertificateReport:
    checks: dict = field(default_factory=dict)
    tolerance_policy: str = ""
    reference_residual: float = 0.0
    status: str = "certified"
    reason: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.status == "certified" and all(c.passed for c in self.checks.values())

    def add(self, check: CheckResult) -> None:
        self.checks[check.name] = check
        if not check.passed and self.status == "certified":
            self.status = "failed"

    def to_dict(self) -> dict:
        out = {name: c.to_dict() for name, c in self.checks.items()}
        out["tolerance_policy"] = self.tolerance_policy
        out["reference_residual"] = self.reference_residual
        out["status"] = self.status
        if self.reason is not None:
            out["reason"] = self.reason
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CertificateReport":
        checks = {k: CheckResult.from_dict(k, v) for k, v in d.items() if k not in _RESERVED}
        return cls(checks, d.get("tolerance_policy", ""), float(d.get("reference_residual", 0.0)),
                   d.get("status", "certified"), d.get("reason"))


def _policy(rel_tol):
    return (
        f"observed <= bound * (1 + {rel_tol:g}) + r * (||y_k - x_ref|| + 1), "
        "r = ||G_s(x_ref)|| at the trace step"
    )


def _initial_data(problem, trace, x_ref, phi_ref):
    x0 = trace.x[0]
    d0 = x0 - x_ref
    return float(d0 @ d0), max(_gap(problem, x0, x_ref, phi_ref), 0.0)


def _build_envelopes(problem, trace, x_ref, phi_ref):
    meta = trace.metadata
    dist0_sq, gap0 = _initial_data(problem, trace, x_ref, phi_ref)
    if trace.method == "ista":
        return ista_envelopes(meta.step, meta.mu, meta.lipschitz, dist0_sq)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fista_envelopes(meta.step, meta.mu, meta.lipschitz, gap0, dist0_sq)


def certify_trace(problem, trace: SolverTrace, x_ref, phi_ref: float, envelopes=None,
                  rel_tol: float = REL_TOL) -> CertificateReport:
    """Check a trace pointwise against its rate envelopes and Lyapunov decay.

    ISTA traces are checked for objective and gradient envelopes and for
    ``||y_k - x*||^2 <= rho^k ||x_0 - x*||^2``. FISTA traces are checked for
    objective and gradient envelopes (plus their simplified forms); traces in
    position/velocity form additionally get the per-step Lyapunov decay check.
    Divergent traces and steps beyond ``1/L`` yield an ``uncertifiable`` report.
    """
    x_ref = np.asarray(x_ref, dtype=np.float64)
    meta = trace.metadata
    residual = float(np.linalg.norm(prox_subgradient(problem, x_ref, meta.step).subgradient))
    report = CertificateReport(tolerance_policy=_policy(rel_tol), reference_residual=residual)

    reason = None
    if trace.diverged:
        reason = "trace diverged"
    elif not step_within_inverse_lipschitz(meta.step, meta.lipschitz):
        reason = f"step {meta.step:g} exceeds 1/L = {1 / meta.lipschitz:g}"
    elif not trace.has_iterates:
        reason = "trace has no stored iterates"
    elif trace.method not in ("ista", "fista_momentum", "fista_phase_space"):
        reason = f"unknown method {trace.method!r}"
    if reason:
        report.status, report.reason = "uncertifiable", reason
        return report

    if envelopes is None:
        envelopes = _build_envelopes(problem, trace, x_ref, phi_ref)
    k = trace.k
    dist_y = np.linalg.norm(trace.y - x_ref, axis=1)
    budget = residual * (dist_y + 1.0)

    def envelope_check(name, observed, env):
        bound = env.evaluate(k)
        report.add(_evaluate_check(name, bound - observed, rel_tol * bound + budget))

    gs = trace.gs_norm_sq
    if trace.method == "ista":
        gaps = objective_gaps(problem, trace.y, x_ref, phi_ref)
        envelope_check("objective_envelope", gaps, envelopes.objective)
        envelope_check("gradient_envelope", gs, envelopes.gradient)
        lyap = ista_lyapunov(trace, x_ref)
        bound = ista_rate(meta.mu, meta.step) ** k * lyap[0]
        report.add(_evaluate_check("lyapunov_decay", bound - lyap, rel_tol * bound + budget))
        return report

    gaps = objective_gaps(problem, trace.x, x_ref, phi_ref)
    envelope_check("objective_envelope", gaps, envelopes.objective)
    envelope_check("simplified_objective_envelope", gaps, envelopes.simplified_objective)
    if envelopes.gradient is not None:
        envelope_check("gradient_envelope", gs, envelopes.gradient)
        envelope_check("simplified_gradient_envelope", gs, envelopes.simplified_gradient)
    if trace.v is not None and len(trace) > 1:
        lyap = fista_lyapunov(problem, trace, x_ref, phi_ref)
        for name, simplified in (("lyapunov_decay", False), ("lyapunov_decay_simplified", True)):
            q = fista_lyapunov_factor(meta.mu, meta.step, simplified)
            slack = lyap[:-1] - q * lyap[1:]
            report.add(_evaluate_check(name, slack, rel_tol * np.abs(lyap[:-1]) + budget[1:]))
    return report


def inequality_suite(problem, x_ref, phi_ref: float, rng: np.random.Generator, n_samples: int = 100,
                     steps=None, rel_tol: float = REL_TOL) -> CertificateReport:
    """Sampled checks of the strong-gap and step-scaled pivotal inequalities.

    Points are drawn around ``x_ref`` at several radii. ``pivotal_mu_monotone``
    verifies that dropping the ``mu`` term only loosens the pivotal bound.
    """
    L = problem.lipschitz
    steps = (1.0 / L, 0.5 / L) if steps is None else tuple(steps)
    d = problem.dimension
    residual = float(np.linalg.norm(prox_subgradient(problem, x_ref, steps[0]).subgradient))
    report = CertificateReport(tolerance_policy=f"slack >= -{rel_tol:g} * scale", reference_residual=residual)

    radii = 10.0 ** rng.uniform(-4, 1, size=n_samples)
    xs = x_ref + radii[:, None] * rng.standard_normal((n_samples, d))
    ys = x_ref + radii[::-1, None] * rng.standard_normal((n_samples, d))

    gap = [check_strong_gap(problem, x, x_ref, phi_ref, with_scale=True) for x in xs]
    slack, scale = np.array(gap).T
    budget = residual * (np.linalg.norm(xs - x_ref, axis=1) + 1.0)
    report.add(_evaluate_check("strong_gap", slack, rel_tol * scale + budget))

    piv, piv0, piv_scale = [], [], []
    for s in steps:
        for x, y in zip(xs, ys):
            sl, sc = check_pivotal(problem, x, y, s, with_scale=True)
            piv.append(sl)
            piv_scale.append(sc)
            piv0.append(check_pivotal(problem, x, y, s, mu=0.0))
    piv, piv0, piv_scale = map(np.array, (piv, piv0, piv_scale))
    report.add(_evaluate_check("pivotal (step-scaled)", piv, rel_tol * piv_scale))
    report.add(_evaluate_check("pivotal_mu_monotone", piv0 - piv, rel_tol * piv_scale))
    return report


def annotate_trace(problem, trace: SolverTrace, x_ref, phi_ref: float) -> dict:
    """Per-iteration columns for the trace table.

    Returns a dict with ``k``, ``gs_norm_sq`` and, where computable,
    ``phi_x_gap``, ``phi_y_gap``, ``lyapunov``, ``envelope_obj`` and
    ``envelope_grad``; uncomputable columns are ``None``.
    """
    cols = {"k": trace.k, "gs_norm_sq": trace.gs_norm_sq, "phi_x_gap": None, "phi_y_gap": None,
            "lyapunov": None, "envelope_obj": None, "envelope_grad": None}
    if not trace.has_iterates:
        return cols
    x_ref = np.asarray(x_ref, dtype=np.float64)
    # diverged traces overflow here; those cells become empty fields
    with np.errstate(over="ignore", invalid="ignore"):
        cols["phi_y_gap"] = objective_gaps(problem, trace.y, x_ref, phi_ref)
        if trace.method == "ista":
            cols["phi_x_gap"] = cols["phi_y_gap"]
            cols["lyapunov"] = ista_lyapunov(trace, x_ref)
        else:
            cols["phi_x_gap"] = objective_gaps(problem, trace.x, x_ref, phi_ref)
            if trace.v is not None:
                cols["lyapunov"] = fista_lyapunov(problem, trace, x_ref, phi_ref)
    meta = trace.metadata
    if not trace.diverged and step_within_inverse_lipschitz(meta.step, meta.lipschitz):
        env = _build_envelopes(problem, trace, x_ref, phi_ref)
        cols["envelope_obj"] = env.objective.evaluate(trace.k)
        if env.gradient is not None:
            cols["envelope_grad"] = env.gradient.evaluate(trace.k)
    return cols
