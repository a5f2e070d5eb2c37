"""
How tight is the weighted van Trees bound?
==========================================

With a Gaussian prior and Brownian noise the posterior is Gaussian and the
conditional mean meets the bound exactly. A bimodal prior opens a gap.
"""

import numpy as np

from fokkerlab import builtin_brownian, gaussian_density, make_uniform_grid, verify_van_trees
from fokkerlab.grid import mixture_density
from fokkerlab.infofun import build_joint

grid = make_uniform_grid(-8, 8, 401)
bm = builtin_brownian()
priors = {
    "gaussian": gaussian_density(0, 1, grid),
    "bimodal": mixture_density([0.5, 0.5], [-2, 2], [0.3, 0.3], grid),
}

for name, prior in priors.items():
    for t in (0.25, 1.0, 4.0):
        r = verify_van_trees(build_joint(prior, bm, None, t), label=name)
        print(f"{name:9} t={t:4}: risk {r.lhs:.5f} >= bound {r.rhs:.5f}  slack {r.params['slack']:.2e}")

# a bad estimator sits far above the bound
r = verify_van_trees(build_joint(priors["gaussian"], bm, None, 1.0), estimator=np.zeros_like)
print(f"zero estimator: risk {r.lhs:.4f} vs bound {r.rhs:.4f}")
