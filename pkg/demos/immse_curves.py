"""
Mutual information and estimation error
=======================================

For each built-in model the rate of information loss through the channel
is a fixed multiple of the minimum mean-square error of recovering the
input. The table compares the finite-difference rate with that product.
"""

import math

from fokkerlab import builtin_brownian, builtin_gbm, builtin_ou, gaussian_density
from fokkerlab import immse_curve, lognormal_density, make_log_grid, make_uniform_grid

prior_line = gaussian_density(0, 1, make_uniform_grid(-8, 8, 401))
prior_pos = lognormal_density(0, 0.09, make_log_grid(math.exp(-2.4), math.exp(2.4), 401))
ts = [0.25, 0.5, 1.0, 2.0, 4.0]

for model, prior in ((builtin_brownian(), prior_line), (builtin_ou(1.0), prior_line),
                     (builtin_gbm(0.1, 0.5), prior_pos)):
    print(f"\n{model.name}")
    print(f"{'t':>5} {'I':>9} {'dI/dt':>11} {'mmse':>9} {'c(t)*mmse':>11}")
    for p in immse_curve(model, prior, ts):
        print(f"{p.t:5.2f} {p.mi:9.5f} {p.mi_rate:11.6f} {p.mmse:9.5f} {p.predicted_rate:11.6f}")

# GBM's mmse column is for log x0; it is the Brownian case in log coordinates
