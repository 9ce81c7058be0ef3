"""Curvature of the tridiagonal lasso.

The smooth part of the 500 x 500 tridiagonal lasso has Hessian A^T A = A^2.
Its extreme eigenvalues follow from the eigenvalues of A, which are known in
closed form. Here we compare them with a dense eigensolver and with power
iteration, the fallback for operators without a formula.
"""

import time

import numpy as np

from proxrate import LinearOperator, condition_number, estimate_lipschitz, tridiagonal_spectrum

n = 500
t0 = time.perf_counter()
mu, L = tridiagonal_spectrum(n, 2.0, 1.0)
print(f"closed form      mu = {mu:.6g}  L = {L:.8g}  ({(time.perf_counter() - t0) * 1e3:.2f} ms)")

A = LinearOperator.tridiagonal(n, 2.0, 1.0)
eig = np.linalg.eigvalsh(A.to_dense()) ** 2
print(f"dense eigvalsh   mu = {eig.min():.6g}  L = {eig.max():.8g}")

# The Rayleigh quotient creeps up on L from below; the gap between the top
# eigenvalues is tiny, hence the many iterations.
print(f"power iteration  L ~ {estimate_lipschitz(A):.8g}")

print(f"condition number L/mu = {condition_number(mu, L):.4g}")
print(f"mu * s at s = 0.05: {mu * 0.05:.3g}  (the linear rates are practically invisible here)")
