"""Proximal map, proximal subgradient and soft-thresholding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ProxEvaluation", "soft_threshold", "prox_point", "prox_subgradient"]


def soft_threshold(z, theta: float) -> np.ndarray:
    """Componentwise shrinkage ``sign(z) * max(|z| - theta, 0)``.

    This is the prox of ``theta * ||.||_1``.
    """
    if theta < 0:
        raise ValueError("threshold must be nonnegative")
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - theta, 0.0)


@dataclass(frozen=True, eq=False)
class ProxEvaluation:
    """One evaluation of the proximal map at ``input_point`` with step ``step``.

    ``subgradient`` is ``(input_point - mapped_point) / step``.
    """

    input_point: np.ndarray
    step: float
    mapped_point: np.ndarray
    subgradient: np.ndarray

    @property
    def subgradient_norm_sq(self) -> float:
        return float(self.subgradient @ self.subgradient)


def prox_point(problem, x, s: float) -> np.ndarray:
    """Forward-backward point ``prox_{s g}(x - s * grad f(x))``."""
    if not s > 0:
        raise ValueError("step must be positive")
    x = problem.check_point(x)
    return problem.nonsmooth.prox(x - s * problem.smooth.gradient(x), s)


def prox_subgradient(problem, x, s: float) -> ProxEvaluation:
    """Evaluate the proximal map at ``x`` together with the gradient mapping
    ``(x - P_s(x)) / s``."""
    x = problem.check_point(x)
    p = prox_point(problem, x, s)
    return ProxEvaluation(x, float(s), p, (x - p) / s)
