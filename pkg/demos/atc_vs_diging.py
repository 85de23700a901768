"""
Adapt-then-combine against plain gradient tracking
==================================================

Each method runs at its own largest certified step on a well-connected
graph, then the closed-form iteration counts are tabulated.
"""

from atcdiging import (GraphSequence, SmoothnessProfile, StepSizeSchedule, metropolis_weights,
                       next_graph, random_quadratic, run, solve_reference)
from atcdiging.rates import complexity_comparison, diging_max_stepsize, max_stepsize
from atcdiging.solvers import default_x0

inst = random_quadratic(12, 4, seed=6, eig_range=(1.0, 10.0))
ref = solve_reference(inst)
prof = inst.profile
w = metropolis_weights(next_graph(GraphSequence.random(12, 0.9, seed=1), 0))
x0 = default_x0(12, 4, 1)

a_atc = 0.999 * max_stepsize(prof, w.delta, 12)
a_dig = 0.999 * diging_max_stepsize(prof, w.delta, 12)
print(f"delta={w.delta:.3f} kappa_bar={prof.kappa_bar:.2f}")
print(f"steps: ATC-DIGing {a_atc:.3e}, DIGing {a_dig:.3e}")
for K in (100, 500, 1000):
    ea = run("atc_diging", inst, w, StepSizeSchedule.coordinated(a_atc, 12), K, ref, x0)
    ed = run("diging", inst, w, StepSizeSchedule.coordinated(a_dig, 12), K, ref, x0)
    print(f"K={K:5d}  ATC {ea.normalized_residual[-1]:.2e}   DIGing {ed.normalized_residual[-1]:.2e}")

print("\niterations to 1e-6 from the closed-form rates (n = 12)")
print(" kappa_bar  delta     K_diging        K_atc")
for kb in (10.0, 100.0):
    for delta in (0.0, 0.1, 0.3, 0.6, 0.9):
        c = complexity_comparison(SmoothnessProfile.uniform(12, kb, 1.0), delta, 12, 1e-6)
        print(f"{kb:10.0f}  {delta:5.1f}  {c.K_diging:11d}  {c.K_atc:11d}")
