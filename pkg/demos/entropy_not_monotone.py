"""
When entropy falls
==================

Entropy only grows for pure diffusion. With drift it can go either way:
an OU process squeezes a wide prior toward its stationary law, and GBM
with a large volatility ends up losing entropy after an initial rise.
"""

import math

import numpy as np

from fokkerlab import builtin_gbm, builtin_ou, gaussian_density, lognormal_density
from fokkerlab import make_log_grid, make_uniform_grid, verify_entropy_rate

line = make_uniform_grid(-12, 12, 1025)
ou = builtin_ou(1.0)
for var in (0.1, 0.5, 2.0):
    r = verify_entropy_rate(ou, gaussian_density(0, var, line), 0.5)
    print(f"OU alpha=1, prior var {var:>3}: dH/dt = {r.lhs:+.5f}  (formula {r.rhs:+.5f})")

# stationary variance is 1/2: below it entropy rises, above it entropy falls

gbm = builtin_gbm(0.3, 1.0)
p0 = lognormal_density(0.0, 0.25, make_log_grid(math.exp(-10), math.exp(12), 1025))
print()
for t in (0.25, 0.5, 1.0, 2.0, 3.0):
    r = verify_entropy_rate(gbm, p0, t)
    print(f"GBM mu=0.3 sigma=1, t={t:4}: dH/dt = {r.lhs:+.5f}  (formula {r.rhs:+.5f})")

# the drift correction E[a' - b''/2] = mu - sigma^2 is negative here, so the
# rate turns negative once the Fisher term has decayed (at t = 2.25 for this prior)
