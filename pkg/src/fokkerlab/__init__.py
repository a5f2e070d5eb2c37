"""Entropy, Fisher information and mmse along 1-D diffusions, checked numerically.

Submodules:

- :mod:`~fokkerlab.grid`: grids, density fields, quadrature, differences
- :mod:`~fokkerlab.process`: SDE models and closed-form transition kernels
- :mod:`~fokkerlab.fpsolver`: positivity-preserving Fokker-Planck solver
- :mod:`~fokkerlab.montecarlo`: Euler-Maruyama particle oracle
- :mod:`~fokkerlab.infofun`: entropy, Fisher-type functionals, joints, mmse
- :mod:`~fokkerlab.identities`: checks of the information identities
- :mod:`~fokkerlab.lingauss`: closed-form multivariate linear-Gaussian case
- :mod:`~fokkerlab.cli`: the ``fokker-lab`` command
"""

__version__ = "0.1.0"

from .errors import FokkerLabError
from .grid import DensityField, Grid1D, gaussian_density, lognormal_density, make_log_grid, make_uniform_grid
from .fpsolver import SolveSpec, Trajectory, solve
from .identities import (
    immse_curve,
    run_checks,
    verify_entropy_rate,
    verify_fisher_bridge,
    verify_kl_rate,
    verify_mi_rate,
    verify_mmse_bridge,
    verify_ou_fisher_bound,
    verify_van_trees,
)
from .montecarlo import ParticleEnsemble, simulate
from .process import SdeModel, builtin_brownian, builtin_gbm, builtin_ou, make_custom_model
from .report import IdentityReport

__all__ = [
    "__version__",
    "DensityField",
    "FokkerLabError",
    "Grid1D",
    "IdentityReport",
    "ParticleEnsemble",
    "SdeModel",
    "SolveSpec",
    "Trajectory",
    "builtin_brownian",
    "builtin_gbm",
    "builtin_ou",
    "gaussian_density",
    "immse_curve",
    "lognormal_density",
    "make_custom_model",
    "make_log_grid",
    "make_uniform_grid",
    "run_checks",
    "simulate",
    "solve",
    "verify_entropy_rate",
    "verify_fisher_bridge",
    "verify_kl_rate",
    "verify_mi_rate",
    "verify_mmse_bridge",
    "verify_ou_fisher_bound",
    "verify_van_trees",
]
