"""Composite objectives ``Phi = f + g`` and the lasso instance family.

A :class:`CompositeProblem` bundles a smooth oracle (value, gradient and the
curvature bounds ``mu`` and ``L``) with a nonsmooth oracle (value and prox).
The lasso problem ``0.5 * ||Ax - b||^2 + lam * ||x||_1`` is the concrete
instance used throughout the package; its matrix may be dense or symmetric
tridiagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .prox import soft_threshold

__all__ = [
    "LinearOperator",
    "SmoothOracle",
    "NonsmoothOracle",
    "CompositeProblem",
    "LassoProblem",
    "make_lasso",
    "make_quadratic",
    "tridiagonal_spectrum",
    "dense_spectrum",
    "operator_spectrum",
    "estimate_lipschitz",
    "condition_number",
    "DENSE_SPECTRUM_MAX_DIM",
]

#: Largest dimension for which spectra are computed by dense factorization.
DENSE_SPECTRUM_MAX_DIM = 1000


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """A dense ``m x d`` matrix or a symmetric tridiagonal ``n x n`` matrix
    with constant diagonal and off-diagonal.

    Use the :meth:`dense`, :meth:`tridiagonal` and :meth:`identity`
    constructors rather than calling the class directly.
    """

    kind: str
    rows: int
    cols: int
    matrix: Optional[np.ndarray] = None
    diag: float = 0.0
    offdiag: float = 0.0

    @classmethod
    def dense(cls, matrix) -> "LinearOperator":
        m = _frozen(matrix)
        if m.ndim != 2:
            raise ValueError(f"dense operator needs a 2-d array, got shape {m.shape}")
        return cls("dense", m.shape[0], m.shape[1], matrix=m)

    @classmethod
    def tridiagonal(cls, n: int, diag: float, offdiag: float) -> "LinearOperator":
        if n < 1:
            raise ValueError("tridiagonal operator needs n >= 1")
        return cls("tridiagonal", int(n), int(n), diag=float(diag), offdiag=float(offdiag))

    @classmethod
    def identity(cls, n: int) -> "LinearOperator":
        return cls.dense(np.eye(n))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.cols,):
            raise ValueError(f"operator expects a vector of length {self.cols}, got shape {x.shape}")
        if self.kind == "dense":
            return self.matrix @ x
        y = self.diag * x
        y[:-1] += self.offdiag * x[1:]
        y[1:] += self.offdiag * x[:-1]
        return y

    def apply_transpose(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "dense":
            if y.shape != (self.rows,):
                raise ValueError(f"transpose expects a vector of length {self.rows}, got shape {y.shape}")
            return self.matrix.T @ y
        return self.apply(y)

    def to_dense(self) -> np.ndarray:
        if self.kind == "dense":
            return np.array(self.matrix)
        n = self.rows
        out = self.diag * np.eye(n)
        idx = np.arange(n - 1)
        out[idx, idx + 1] = self.offdiag
        out[idx + 1, idx] = self.offdiag
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinearOperator):
            return NotImplemented
        if (self.kind, self.rows, self.cols) != (other.kind, other.rows, other.cols):
            return False
        if self.kind == "dense":
            return bool(np.array_equal(self.matrix, other.matrix))
        return self.diag == other.diag and self.offdiag == other.offdiag


@dataclass(frozen=True)
class SmoothOracle:
    """Smooth part ``f`` with gradient and curvature bounds.

    ``difference(x, y)`` optionally returns ``f(x) - f(y)`` evaluated without
    cancellation.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    mu: float
    lipschitz: float
    difference: Optional[Callable[[np.ndarray, np.ndarray], float]] = None

    def __post_init__(self):
        if not (self.lipschitz > 0):
            raise ValueError("lipschitz constant must be positive")
        if not (0 <= self.mu <= self.lipschitz):
            raise ValueError(f"need 0 <= mu <= L, got mu={self.mu}, L={self.lipschitz}")


@dataclass(frozen=True)
class NonsmoothOracle:
    """Convex part ``g``; ``prox(z, theta)`` minimizes
    ``||u - z||^2 / (2 theta) + g(u)`` over ``u``."""

    value: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]
    difference: Optional[Callable[[np.ndarray, np.ndarray], float]] = None


@dataclass(frozen=True)
class CompositeProblem:
    smooth: SmoothOracle
    nonsmooth: NonsmoothOracle
    dimension: int

    @property
    def mu(self) -> float:
        return self.smooth.mu

    @property
    def lipschitz(self) -> float:
        return self.smooth.lipschitz

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise ValueError(f"expected a point of shape ({self.dimension},), got {x.shape}")
        return x

    def objective(self, x) -> float:
        x = self.check_point(x)
        return float(self.smooth.value(x) + self.nonsmooth.value(x))

    def objective_difference(self, x, y) -> float:
        """``Phi(x) - Phi(y)``, using cancellation-free forms when the oracles
        provide them."""
        x = self.check_point(x)
        y = self.check_point(y)
        if self.smooth.difference is not None:
            df = self.smooth.difference(x, y)
        else:
            df = self.smooth.value(x) - self.smooth.value(y)
        if self.nonsmooth.difference is not None:
            dg = self.nonsmooth.difference(x, y)
        else:
            dg = self.nonsmooth.value(x) - self.nonsmooth.value(y)
        return float(df + dg)


@dataclass(frozen=True, eq=False)
class LassoProblem(CompositeProblem):
    """``0.5 * ||Ax - b||^2 + lam * ||x||_1`` with its data kept accessible."""

    operator: LinearOperator = field(default=None)
    b: np.ndarray = field(default=None)
    lam: float = 0.0


def make_lasso(A: LinearOperator, b, lam: float, mu: float, L: float) -> LassoProblem:
    """Build the lasso objective for operator ``A``, data ``b`` and weight ``lam``.

    ``mu`` and ``L`` are the extreme eigenvalues of ``A^T A`` and must be
    supplied by the caller (see :func:`tridiagonal_spectrum`,
    :func:`dense_spectrum` and :func:`estimate_lipschitz`).
    """
    if isinstance(A, np.ndarray):
        A = LinearOperator.dense(A)
    b = _frozen(b)
    if b.shape != (A.rows,):
        raise ValueError(f"b has shape {b.shape} but the operator has {A.rows} rows")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    lam = float(lam)

    def residual(x):
        return A.apply(x) - b

    def value(x):
        r = residual(x)
        return 0.5 * float(r @ r)

    def gradient(x):
        return A.apply_transpose(residual(x))

    def smooth_difference(x, y):
        ad = A.apply(x - y)
        return 0.5 * float(ad @ ad) + float(residual(y) @ ad)

    smooth = SmoothOracle(value, gradient, float(mu), float(L), difference=smooth_difference)
    nonsmooth = NonsmoothOracle(
        value=lambda x: lam * float(np.sum(np.abs(x))),
        prox=lambda z, theta: soft_threshold(z, lam * theta),
        difference=lambda x, y: lam * float(np.sum(np.abs(x) - np.abs(y))),
    )
    return LassoProblem(smooth, nonsmooth, A.cols, operator=A, b=b, lam=lam)


def make_quadratic(scale: float = 1.0, weight: float = 0.0) -> LassoProblem:
    """One-dimensional ``f(x) = scale * x^2 / 2`` with ``g(x) = weight * |x|``."""
    root = math.sqrt(scale)
    return make_lasso(LinearOperator.dense([[root]]), [0.0], weight, scale, scale)


def tridiagonal_spectrum(n: int, diag: float, offdiag: float) -> tuple[float, float]:
    """Extreme eigenvalues ``(mu, L)`` of ``A^T A = A^2`` for the symmetric
    tridiagonal ``A`` with constant diagonal ``diag`` and off-diagonal
    ``offdiag``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    j = np.arange(1, n + 1)
    sigma = diag + 2.0 * offdiag * np.cos(j * np.pi / (n + 1))
    sq = sigma**2
    return float(sq.min()), float(sq.max())


def dense_spectrum(A: LinearOperator) -> tuple[float, float]:
    """``(mu, L)`` from the singular values of a materialized ``A``.

    Returns ``mu = 0`` when ``A`` has fewer rows than columns.
    """
    if A.cols > DENSE_SPECTRUM_MAX_DIM:
        raise ValueError(
            f"dense spectrum limited to {DENSE_SPECTRUM_MAX_DIM} columns; use estimate_lipschitz"
        )
    sv = np.linalg.svd(A.to_dense(), compute_uv=False)
    L = float(sv.max() ** 2)
    mu = float(sv.min() ** 2) if A.rows >= A.cols else 0.0
    return mu, L


def operator_spectrum(A: LinearOperator) -> tuple[float, float]:
    if A.kind == "tridiagonal":
        return tridiagonal_spectrum(A.rows, A.diag, A.offdiag)
    return dense_spectrum(A)


def estimate_lipschitz(A: LinearOperator, iters: int = 20000, tol: float = 1e-10, seed: int = 0) -> float:
    """Power-iteration estimate of ``lambda_max(A^T A)``.

    The Rayleigh quotient ``||A v||^2`` never exceeds the true value. Iteration
    stops once its relative change drops below ``tol``.
    """
    if iters < 1 or tol <= 0:
        raise ValueError("need iters >= 1 and tol > 0")
    v = np.random.default_rng(seed).standard_normal(A.cols)
    v /= np.linalg.norm(v)
    prev = None
    rq = 0.0
    for _ in range(iters):
        w = A.apply(v)
        rq = float(w @ w)
        if rq == 0.0:
            return 0.0
        if prev is not None and abs(rq - prev) <= tol * rq:
            break
        prev = rq
        u = A.apply_transpose(w)
        v = u / np.linalg.norm(u)
    return rq


def condition_number(mu: float, L: float) -> float:
    """``L / mu``; ``inf`` when ``mu == 0``."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if mu == 0:
        return math.inf
    return L / mu
