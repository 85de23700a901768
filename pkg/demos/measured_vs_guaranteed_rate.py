"""
Measured rate against the guaranteed one
========================================

On a fixed ring the guaranteed rate is available in closed form. Sweep the
largest step as a fraction of its admissible maximum and compare with the
slope of the log residual.
"""

import math

import numpy as np

from atcdiging import StepSizeSchedule, metropolis_weights, random_quadratic, ring_graph, run, solve_reference
from atcdiging.rates import fit_log_rate, max_stepsize, guaranteed_rate
from atcdiging.solvers import default_x0

inst = random_quadratic(6, 3, seed=4, eig_range=(1.0, 1.6))
ref = solve_reference(inst)
w = metropolis_weights(ring_graph(6))
print(f"delta = {w.delta:.4f}, kappa_bar = {inst.profile.kappa_bar:.3f}")

for kd in (1.0, 1.02):
    amax = max_stepsize(inst.profile, w.delta, 6, kd)
    print(f"\nkappa_D = {kd}: admissible alpha_max < {amax:.3e}")
    for frac in (0.1, 0.5, 0.9):
        a = frac * amax
        lam = guaranteed_rate(inst.profile, w.delta, 6, kd, a)
        sched = StepSizeSchedule.constant(np.linspace(a, a / kd, 6))
        tr = run("atc_diging", inst, w, sched, 20000, ref, default_x0(6, 3, 1), stop_tol=1e-11)
        fit = fit_log_rate(tr.residual)
        # per-iteration rates this close to 1 read better as 1 - rate
        print(f"  {frac:.1f} x max: 1-lambda = {1 - lam:.3e}, 1-measured = {1 - fit.rate:.3e}, "
              f"ratio of log-rates {math.log(fit.rate) / math.log(lam):.1f}")
