"""Checking rate bounds against actual iterates.

On a random lasso with mu/L = 0.1 we run ISTA at s = 1/L and FISTA in
position/velocity form at s = 1/(2L), compute a high-accuracy reference
minimizer, and check every iterate against the corresponding envelope and
Lyapunov decay. The worst signed slack of each check is printed; it is
nonnegative up to the tolerance when the bound holds.
"""

import warnings

import numpy as np

from proxrate import StoppingRule, build_random_lasso, certify_trace, fista_phase_space, ista, reference_solution

problem = build_random_lasso(60, 40, mu_target=0.2, L_target=2.0, seed=1, lam=0.05)
ref = reference_solution(problem)
print(f"reference residual ||G_s(x_ref)|| = {ref.residual:.2e}  (polished: {ref.polished})")

x0 = np.zeros(problem.dimension)
L = problem.lipschitz
traces = [
    ista(problem, x0, 1.0 / L, StoppingRule(500)),
    fista_phase_space(problem, x0, 0.5 / L, StoppingRule(500)),
]

for trace in traces:
    report = certify_trace(problem, trace, ref.x, ref.phi)
    print(f"\n{trace.method} (s = {trace.step:.3g}): {report.status}")
    for name, check in report.checks.items():
        print(f"  {name:32s} worst slack {check.worst_slack:+.3e} at k={check.worst_index:<4d} "
              f"allowance {check.tolerance:.1e}")

# A step beyond 1/L voids the hypotheses; the trace is reported, not judged.
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    long_step = ista(problem, x0, 1.5 / L, StoppingRule(50))
print(f"\nista at s = 1.5/L: {certify_trace(problem, long_step, ref.x, ref.phi).reason}")
