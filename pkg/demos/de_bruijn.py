"""
Entropy growth under Brownian motion
====================================

Heat flow spreads a density, and the rate at which its entropy grows is
half its Fisher information. Here both sides are computed separately on a
grid and printed along the trajectory.
"""

import numpy as np

from fokkerlab import SolveSpec, builtin_brownian, gaussian_density, make_uniform_grid, solve
from fokkerlab.infofun import entropy, fisher_b

grid = make_uniform_grid(-12, 12, 1025)
bm = builtin_brownian()

# start from a two-bump density so nothing is Gaussian to begin with
p0 = gaussian_density(-1.5, 0.3, grid)
p0 = p0.with_values(0.5 * p0.values + 0.5 * gaussian_density(1.5, 0.3, grid).values)

times = np.round(np.linspace(0.05, 3.0, 12), 4)
h = 1e-3
stencil = sorted({float(s) for t in times for s in (t - h, t, t + h)})
traj = solve(SolveSpec(bm, p0, float(times[-1] + h), snapshot_times=stencil))

print(f"{'t':>6} {'H(t)':>10} {'dH/dt':>10} {'J/2':>10}")
for t in times:
    rate = (entropy(traj.at(t + h)) - entropy(traj.at(t - h))) / (2 * h)
    half_j = 0.5 * fisher_b(traj.at(t))
    print(f"{t:6.3f} {entropy(traj.at(t)):10.5f} {rate:10.6f} {half_j:10.6f}")

# the rate decays like 1/(2(var + t)) once the bumps have merged
