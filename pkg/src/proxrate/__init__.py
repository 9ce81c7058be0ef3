"""ISTA and strongly convex FISTA for composite problems, with tools that
check their linear-rate bounds on actual iterates."""

from .certify import (
    CertificateReport,
    RateEnvelope,
    RateHypothesisError,
    certify_trace,
    check_pivotal,
    check_strong_gap,
    fista_envelopes,
    fista_lyapunov,
    inequality_suite,
    ista_envelopes,
    ista_lyapunov,
)
from .experiments import ExperimentConfig, run_experiment, tail_rate_estimate
from .instances import build_paper_instance, build_random_lasso, build_tridiagonal_lasso
from .problem import (
    CompositeProblem,
    LassoProblem,
    LinearOperator,
    NonsmoothOracle,
    SmoothOracle,
    condition_number,
    dense_spectrum,
    estimate_lipschitz,
    make_lasso,
    tridiagonal_spectrum,
)
from .prox import ProxEvaluation, prox_point, prox_subgradient, soft_threshold
from .solvers import (
    ReferenceSolution,
    SolverTrace,
    StoppingRule,
    fista_momentum,
    fista_phase_space,
    ista,
    reference_solution,
)

__version__ = "0.1.0"
