"""
How much step-size heterogeneity is allowed
===========================================

The guarantee tolerates kappa_D = alpha_max / alpha_min only up to a limit
set by the network and the conditioning. Past it, no step is certified.
"""

import numpy as np

from atcdiging import SmoothnessProfile
from atcdiging.errors import HeterogeneityTooLarge
from atcdiging.rates import max_kappa_D, max_stepsize, guaranteed_rate

for kb in (1.2, 2.0, 10.0):
    prof = SmoothnessProfile.uniform(8, kb, 1.0)
    print(f"\nkappa_bar = {kb}")
    for delta in (0.0, 0.3, 0.6, 0.9):
        limit = max_kappa_D(prof, delta)
        cells = []
        for kd in (1.0, 1.01, 1.05):
            try:
                a = 0.5 * max_stepsize(prof, delta, 8, kd)
                cells.append(f"1-lambda={1 - guaranteed_rate(prof, delta, 8, kd, a):.1e}")
            except HeterogeneityTooLarge:
                cells.append("infeasible".ljust(16))
        print(f"  delta={delta:.1f}  kappa_D limit {limit:.4f}  " + "  ".join(cells))

# the perturbed schedule of the time-varying demo lives far outside this range
z = np.random.default_rng(0).uniform(0.5, 1.5, (1000, 12))
print("\nU(0.5, 1.5) on 12 agents: mean kappa_D =", round(float((z.max(1) / z.min(1)).mean()), 3))
