"""
How loose are the theoretical constants?
========================================

1. Mixing of the cycled weight matrices: the transition products reach the
   averaging matrix within a handful of steps, while the contraction
   constants only promise decay at rate 1 - 1e-8.
2. The O(sqrt(T)) regret bound against the measured regret.
3. Coupled runs on adjacent datasets against the sensitivity bound.
"""

import numpy as np

from dpdonc import WeightSchedule, estimate_regret, preset, run_monte_carlo
from dpdonc.diagnostics import bound_report
from dpdonc.experiment import build_run_config
from dpdonc.graph import check_B_strong_connectivity, tracking_matrices, transition_products
from dpdonc.privacy import empirical_sensitivity_test

sched = WeightSchedule(tracking_matrices())
C, lam = sched.contraction_constants()
print(f"window B = {check_B_strong_connectivity(sched)}, a = {sched.a:.4f}, C = {C:.3g}, 1 - lambda = {1 - lam:.3g}")

dev = np.abs(transition_products(sched, 6) - 1 / 6).max(axis=(1, 2))
for t in range(1, 7):
    print(f"  t={t}  max|Phi(t,1) - 1/N| = {dev[t - 1]:.2e}   guaranteed <= {C * lam ** (t - 1):.3g}")

rc = build_run_config(preset("paper-s5"))
report = estimate_regret(run_monte_carlo(rc), rc.omega)
br = bound_report(rc, report, taus=[100, 500])
print(f"\nU1 = {br.U1:.3g}, U2 = {br.U2:.3g}")
for T, emp in br.empirical.items():
    print(f"  T={T}: bound {br.bound(T):.3g}   measured max_i E[R_T] {emp:.4g}")

# node 2 reports a completely different range sequence
prob = rc.problem
adj = prob.adjacent(2, np.random.default_rng(0).uniform(0, 2, size=prob.T))
sens = empirical_sensitivity_test(prob, adj, rc)
print(f"\nadjacent runs: worst ||x - x'||_1 / bound = {sens.max_ratio:.4f} (theta = {sens.theta:.4f})")
