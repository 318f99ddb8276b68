"""Solve X = A^1/2 X A^1/2 + B for A = B ~ fbp(2, 5) and compare three ways.

Route 1 iterates the subordination map, route 2 is the closed-form answer
fbp(2, 3), route 3 is a truncated random-matrix series.
"""
import numpy as np

from freeperp.measure import builtin_law, levy_distance
from freeperp.perpetuity import PerpetuityProblem, moment_report, solve_perpetuity
from freeperp.rm_oracle import MatrixEnsembleConfig, empirical_perpetuity
from freeperp.subordination import JointLaw

rho = JointLaw.graph(builtin_law("free_beta_prime", 2, 5))
problem = PerpetuityProblem(rho)
print(f"{problem.criticality}, tau(A) = {problem.tau_A:.4f}")

res = solve_perpetuity(problem, levy_tol=1e-3,
                       callback=lambda k, d, mu: print(f"  step {k:2d}  Levy step {d:.2e}"))
exact = builtin_law("free_beta_prime", 2, 3)
mc = empirical_perpetuity(rho, MatrixEnsembleConfig(N=300, trials=4, seed=0, n_terms=40))

q = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
print("\n    q    solver     exact   matrices")
for row in zip(q, res.law.quantile(q), exact.quantile(q), mc.quantile(q)):
    print("  {:.2f}  {:8.4f}  {:8.4f}  {:8.4f}".format(*row))
print(f"\nLevy(solver, exact) = {levy_distance(res.law, exact):.2e}")
print(f"Levy(matrices, exact) = {levy_distance(mc, exact):.2e}")

rep = moment_report(problem, res.law, orders=(1, 2, 3))
for p, m in rep.moments.items():
    print(f"  moment {p}: {m:.5f}  finite={rep.finite[p]}")
