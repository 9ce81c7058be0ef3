"""Problem instances: the ill-conditioned tridiagonal lasso and seeded random
lasso problems with prescribed curvature."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import LassoProblem, LinearOperator, make_lasso, tridiagonal_spectrum

__all__ = [
    "BENCHMARK_N",
    "BENCHMARK_LAMBDA",
    "BENCHMARK_STEP",
    "BenchmarkInstance",
    "build_paper_instance",
    "build_tridiagonal_lasso",
    "build_random_lasso",
]

BENCHMARK_N = 500
BENCHMARK_LAMBDA = 1e-6
BENCHMARK_STEP = 0.05


@dataclass(frozen=True, eq=False)
class BenchmarkInstance:
    problem: LassoProblem
    step: float
    metadata: dict = field(default_factory=dict)


def build_tridiagonal_lasso(n: int, diag: float = 2.0, offdiag: float = 1.0, b_fill: float = 1.0,
                            lam: float = BENCHMARK_LAMBDA) -> LassoProblem:
    """Lasso with the symmetric tridiagonal ``A`` and constant data ``b``;
    ``mu`` and ``L`` come from the closed-form spectrum."""
    mu, L = tridiagonal_spectrum(n, diag, offdiag)
    return make_lasso(LinearOperator.tridiagonal(n, diag, offdiag), np.full(n, float(b_fill)), lam, mu, L)


def build_paper_instance() -> BenchmarkInstance:
    """The 500 x 500 tridiagonal ``(1, 2, 1)`` lasso with ``b = 1``,
    ``lam = 1e-6`` and step ``0.05``."""
    problem = build_tridiagonal_lasso(BENCHMARK_N, 2.0, 1.0, 1.0, BENCHMARK_LAMBDA)
    meta = {
        "name": "tridiagonal-500",
        "n": BENCHMARK_N,
        "diag": 2.0,
        "offdiag": 1.0,
        "b_fill": 1.0,
        "lambda": BENCHMARK_LAMBDA,
        "step": BENCHMARK_STEP,
        "mu": problem.mu,
        "L": problem.lipschitz,
    }
    return BenchmarkInstance(problem, BENCHMARK_STEP, meta)


def _haar_orthonormal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def build_random_lasso(m: int, d: int, mu_target: float, L_target: float, seed: int,
                       lam: float) -> LassoProblem:
    """Random lasso whose ``A^T A`` has extreme eigenvalues exactly
    ``mu_target`` and ``L_target``.

    ``A = U diag(sigma) V^T`` with Haar-distributed orthonormal factors and
    singular values evenly spaced between ``sqrt(L_target)`` and
    ``sqrt(mu_target)``. Randomness comes from ``numpy.random.default_rng(seed)``
    (PCG64), drawn in the order ``U``, ``V``, ``b``.
    """
    if m < d:
        raise ValueError("need m >= d, otherwise A^T A is singular")
    if not 0 < mu_target <= L_target:
        raise ValueError("need 0 < mu_target <= L_target")
    if d == 1 and mu_target != L_target:
        raise ValueError("a single column has one singular value; need mu_target == L_target")
    rng = np.random.default_rng(seed)
    U = _haar_orthonormal(rng, m, d)
    V = _haar_orthonormal(rng, d, d)
    sigma = np.linspace(np.sqrt(L_target), np.sqrt(mu_target), d)
    A = (U * sigma) @ V.T
    b = rng.standard_normal(m)
    return make_lasso(LinearOperator.dense(A), b, lam, mu_target, L_target)
