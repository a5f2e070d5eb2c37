"""
Particles against the grid
==========================

A Monte Carlo ensemble shares no code with the Fokker-Planck solver, so
agreement between the two is a useful end-to-end check. We compare the
density at t=1 and the posterior mean-square error of the input.
"""

import numpy as np

from fokkerlab import SolveSpec, builtin_ou, gaussian_density, make_uniform_grid, simulate, solve
from fokkerlab.grid import l1_distance
from fokkerlab.infofun import build_joint, mmse_b
from fokkerlab.montecarlo import kde_density, mc_mmse

ou = builtin_ou(1.0)
rng = np.random.default_rng(0)
x0 = rng.normal(0, 1, 100_000)

# Euler-Maruyama bias is O(dt), so keep the step small for a fair comparison
ens = simulate(ou, x0, 1.0, 1e-3, seed=0)

line = make_uniform_grid(-12, 12, 1025)
grid_field = solve(SolveSpec(ou, gaussian_density(0, 1, line), 1.0)).at(1.0)
print("L1(KDE, solver) =", round(l1_distance(kde_density(ens, line), grid_field), 4))

joint = build_joint(gaussian_density(0, 1, make_uniform_grid(-8, 8, 401)), ou, None, 1.0)
exact = mmse_b(joint, lambda a, y: a)
est, se = mc_mmse(ens, "x0", bins=200, return_stderr=True)
print(f"mmse grid {exact:.5f}, particles {est:.5f} +/- {se:.5f}  (z = {(est - exact) / se:+.2f})")
