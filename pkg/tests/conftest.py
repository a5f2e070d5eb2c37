import math

import numpy as np
import pytest

from fokkerlab.grid import (
    gaussian_density,
    lognormal_density,
    make_log_grid,
    make_uniform_grid,
    mixture_density,
)
from fokkerlab.process import builtin_brownian, builtin_gbm, builtin_ou


@pytest.fixture(scope="session")
def line_grid():
    return make_uniform_grid(-12.0, 12.0, 1025)


@pytest.fixture(scope="session")
def prior_grid():
    return make_uniform_grid(-8.0, 8.0, 401)


@pytest.fixture(scope="session")
def bm():
    return builtin_brownian()


@pytest.fixture(scope="session")
def ou():
    return builtin_ou(1.0)


@pytest.fixture(scope="session")
def gbm():
    return builtin_gbm(0.1, 0.5)


def gbm_prior(log_var=0.09, n=401):
    s = math.sqrt(log_var)
    g = make_log_grid(math.exp(-8 * s), math.exp(8 * s), n)
    return lognormal_density(0.0, log_var, g)


def mixture_prior(grid):
    return mixture_density([0.4, 0.6], [-1.5, 1.0], [0.5, 0.8], grid)


def std_normal(grid):
    return gaussian_density(0.0, 1.0, grid)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-12)
