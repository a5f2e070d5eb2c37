import math

import numpy as np
import pytest

from conftest import gbm_prior, mixture_prior, rel, std_normal
from fokkerlab.errors import (
    AbsoluteContinuityError,
    DegenerateDensityError,
    DomainError,
    PreconditionError,
    UnsupportedModelError,
)
from fokkerlab.grid import (
    DensityField,
    gaussian_density,
    integrate,
    lognormal_density,
    make_log_grid,
    make_uniform_grid,
    mixture_density,
)
from fokkerlab.infofun import (
    JointDensity,
    UNIT_WEIGHT,
    WeightFunction,
    bregman_divergence,
    build_joint,
    build_joint_numeric,
    conditional_fisher_b,
    conditional_mean,
    constant_weight,
    entropy,
    fisher_b,
    fisher_gradient,
    kl,
    model_weight,
    mmse_b,
    mutual_fisher_b,
    mutual_information,
    pointwise_statistical_fisher,
    relative_fisher_b,
    score_unbiasedness_gap,
    statistical_fisher_b,
)
from fokkerlab.process import TransitionKernel, builtin_gbm, builtin_ou, make_custom_model

G = make_uniform_grid(-12, 12, 1025)


class TestEntropyKL:
    def test_standard_normal(self):
        assert entropy(gaussian_density(0, 1, G)) == pytest.approx(1.41894, abs=1e-5)

    def test_uniform(self):
        g = make_uniform_grid(0, 1, 101)
        assert entropy(DensityField(g, np.ones(101))) == pytest.approx(0.0, abs=1e-14)

    def test_variance_two(self):
        assert entropy(gaussian_density(0, 2, G)) == pytest.approx(1.76551, abs=1e-5)

    def test_unnormalized_rejected(self):
        g = make_uniform_grid(0, 1, 101)
        with pytest.raises(PreconditionError):
            entropy(DensityField(g, 2 * np.ones(101)))

    def test_kl_values(self):
        p, q, r = (gaussian_density(0, 1, G), gaussian_density(1, 1, G), gaussian_density(0, 2, G))
        assert kl(p, p) == 0.0
        assert kl(p, q) == pytest.approx(0.5, abs=1e-6)
        assert kl(p, r) == pytest.approx(0.5 * math.log(2) - 0.25, abs=1e-6)

    def test_kl_support_mismatch(self):
        g = make_uniform_grid(0, 1, 101)
        p = DensityField(g, np.ones(101))
        v = np.ones(101)
        v[:50] = 0
        q = DensityField(g, v / integrate(v, g))
        with pytest.raises(AbsoluteContinuityError):
            kl(p, q)

    def test_refinement_invariance(self):
        coarse, fine = make_uniform_grid(-12, 12, 513), make_uniform_grid(-12, 12, 1025)
        for f in (entropy, lambda p: fisher_b(p)):
            assert abs(f(gaussian_density(0.3, 1.7, coarse)) - f(gaussian_density(0.3, 1.7, fine))) < 1e-4


class TestFisher:
    def test_standard_normal(self):
        assert fisher_b(gaussian_density(0, 1, G)) == pytest.approx(1.0, rel=1e-6)

    def test_variance_two(self):
        assert fisher_b(gaussian_density(0, 2, G)) == pytest.approx(0.5, rel=1e-6)

    def test_gbm_lognormal_weighted(self):
        m = builtin_gbm(0.2, 1.0)
        g = make_log_grid(math.exp(-12), math.exp(12), 2049)
        p = lognormal_density(0.2 - 0.5, 1.0, g)
        assert fisher_b(p, model_weight(m)) == pytest.approx(2.0, rel=1e-4)

    def test_relative_fisher(self):
        p, q, r = (gaussian_density(0, 1, G), gaussian_density(1, 1, G), gaussian_density(0, 2, G))
        assert relative_fisher_b(p, p) == 0.0
        assert relative_fisher_b(p, q) == pytest.approx(1.0, rel=1e-6)
        assert relative_fisher_b(p, r) == pytest.approx(0.25, rel=1e-6)

    def test_weight_must_be_positive(self):
        w = WeightFunction(lambda x, t: x, "x")
        with pytest.raises(DomainError):
            fisher_b(gaussian_density(0, 1, G), w)

    def test_constant_weight_scales(self):
        p = gaussian_density(0, 1, G)
        assert fisher_b(p, constant_weight(3.0)) == pytest.approx(3 * fisher_b(p, UNIT_WEIGHT))


class TestFisherGradient:
    def test_standard_normal(self):
        p = gaussian_density(0, 1, G)
        grad = fisher_gradient(p)
        core = np.abs(G.nodes) < 5
        np.testing.assert_allclose(grad[core], 2 - G.nodes[core] ** 2, atol=1e-3)
        assert grad[512] == pytest.approx(2.0, abs=1e-4)

    @pytest.mark.parametrize("var", [0.5, 2.0])
    def test_origin_value(self, var):
        assert fisher_gradient(gaussian_density(0, var, G))[512] == pytest.approx(2 / var, rel=1e-3)

    def test_directional_derivative(self):
        # both sides carry O(h²) error; 2049 nodes keeps the gap near 6e-4
        G = make_uniform_grid(-12, 12, 2049)
        rng = np.random.default_rng(3)
        p = mixture_density([0.5, 0.5], [-1, 1.2], [0.7, 1.1], G)
        for _ in range(5):
            c = rng.uniform(-2, 2)
            v = np.exp(-(G.nodes - c) ** 2) * (G.nodes - c)
            v = v - p.values * integrate(v, G)
            eps = 1e-4
            plus = fisher_b(p.with_values(p.values + eps * v))
            minus = fisher_b(p.with_values(p.values - eps * v))
            quotient = (plus - minus) / (2 * eps)
            inner = integrate(fisher_gradient(p) * v, G)
            assert rel(inner, quotient) <= 1e-3


class TestBregman:
    def test_identity(self):
        p = gaussian_density(0, 1, G)
        assert abs(bregman_divergence(p, p)) <= 1e-10

    def test_shifted_gaussian(self):
        p, q = gaussian_density(0, 1, G), gaussian_density(0.5, 1, G)
        assert rel(bregman_divergence(p, q), relative_fisher_b(p, q)) <= 1e-3

    def test_nonnegative_weighted(self):
        m = builtin_ou(1.0)
        p, q = mixture_prior(G), gaussian_density(0.2, 1.3, G)
        assert bregman_divergence(p, q, model_weight(m)) >= -1e-6


class TestJoint:
    def test_bm_marginal(self, bm, prior_grid):
        j = build_joint(std_normal(prior_grid), bm, None, 1.0)
        y = j.grid_xt.nodes
        ref = np.exp(-y ** 2 / 4) / math.sqrt(4 * math.pi)
        assert integrate(np.abs(j.marginal_xt().values - ref), j.grid_xt) <= 1e-6

    def test_point_mass_prior_gives_kernel_slice(self, bm):
        g = make_uniform_grid(-1, 1, 401)
        prior = gaussian_density(0.3, 1e-3, g)
        j = build_joint(prior, bm, None, 1.0)
        ref = bm.kernel.density(0.3, j.grid_xt.nodes, 1.0)
        assert integrate(np.abs(j.marginal_xt().values - ref), j.grid_xt) <= 5e-3

    def test_gbm_marginal_lognormal(self, gbm):
        prior = lognormal_density(0.0, 1e-4, make_log_grid(math.exp(-0.08), math.exp(0.08), 201))
        j = build_joint(prior, gbm, None, 1.0)
        c = 0.1 - 0.125
        ref = lognormal_density(c, 0.25 + 1e-4, j.grid_xt)
        assert integrate(np.abs(j.marginal_xt().values - ref.values), j.grid_xt) <= 1e-3
        assert j.marginal_xt().support_kind == "positive-half-line"

    def test_invariants_enforced(self, bm, prior_grid):
        j = build_joint(std_normal(prior_grid), bm, None, 1.0)
        with pytest.raises(DegenerateDensityError):
            JointDensity(j.grid_x0, j.grid_xt, 2 * j.values, j.prior, 1.0)

    def test_requires_kernel(self, prior_grid):
        m = make_custom_model("-x", "1")
        with pytest.raises(UnsupportedModelError):
            build_joint(std_normal(prior_grid), m, None, 1.0)

    def test_requires_positive_t(self, bm, prior_grid):
        with pytest.raises(PreconditionError):
            build_joint(std_normal(prior_grid), bm, None, 0.0)
        with pytest.raises(PreconditionError):
            build_joint_numeric(std_normal(prior_grid), bm, G, 0.0)

    def test_numeric_matches_kernel_bm(self, bm):
        pg = make_uniform_grid(-6, 6, 97)
        prior = std_normal(pg)
        num = build_joint_numeric(prior, bm, G, 1.0)
        ker = build_joint(prior, bm, G, 1.0)
        l1 = integrate(integrate(np.abs(num.values - ker.values), G, axis=1), pg)
        assert l1 <= 5e-3

    def test_numeric_conditional_fisher_ou(self):
        m = builtin_ou(1.0)
        pg = make_uniform_grid(-6, 6, 97)
        t = 0.5 * math.log(2)
        num = build_joint_numeric(std_normal(pg), m, G, t)
        assert rel(conditional_fisher_b(num), 4.0) <= 1e-2


@pytest.fixture(scope="module")
def bm_joint(bm, prior_grid):
    return build_joint(std_normal(prior_grid), bm, None, 1.0)


class TestJointFunctionals:

    def test_conditional_fisher_bm(self, bm, prior_grid):
        j = build_joint(mixture_prior(prior_grid), bm, None, 0.5)
        assert rel(conditional_fisher_b(j), 2.0) <= 1e-2

    def test_conditional_fisher_ou(self, ou, prior_grid):
        j = build_joint(std_normal(prior_grid), ou, None, 0.5 * math.log(2))
        assert rel(conditional_fisher_b(j), 4.0) <= 1e-2

    def test_conditional_fisher_gbm(self):
        m = builtin_gbm(0.1, 1.0)
        j = build_joint(gbm_prior(0.04), m, None, 1.0)
        assert rel(conditional_fisher_b(j, model_weight(m)), 2.0) <= 1e-2

    def test_mutual_fisher_bm(self, bm_joint):
        assert rel(mutual_fisher_b(bm_joint), 0.5) <= 1e-2
        assert mutual_fisher_b(bm_joint) <= 1.0 + 1e-4

    def test_statistical_fisher_bm(self, bm_joint):
        assert rel(statistical_fisher_b(bm_joint), 0.5) <= 1e-2

    def test_mmse_bm(self, bm_joint):
        assert rel(mmse_b(bm_joint, lambda x0, y: x0), 0.5) <= 1e-2
        assert mmse_b(bm_joint, lambda x0, y: 3.0 + 0 * x0) == pytest.approx(0.0, abs=1e-12)

    def test_mi_bm(self, bm_joint):
        assert mutual_information(bm_joint) == pytest.approx(0.5 * math.log(2), abs=1e-3)

    def test_mi_large_t(self, bm, prior_grid):
        assert mutual_information(build_joint(std_normal(prior_grid), bm, None, 100.0)) <= 0.01

    def test_independent_joint(self, prior_grid):
        flat = TransitionKernel(
            density=lambda x0, y, t: np.exp(-y ** 2 / 2) / math.sqrt(2 * math.pi) + 0 * x0,
            score=lambda x0, y, t: -y + 0 * x0,
            output_range=lambda lo, hi, t, w: (-w, w),
        )
        j = build_joint(std_normal(prior_grid), flat, None, 1.0)
        assert abs(mutual_fisher_b(j)) <= 1e-4
        assert abs(statistical_fisher_b(j)) <= 1e-4
        assert abs(mutual_information(j)) <= 1e-5

    def test_conditional_mean_gaussian(self, bm_joint):
        y = bm_joint.grid_xt.nodes
        cm = conditional_mean(bm_joint)
        core = np.abs(y) < 4
        np.testing.assert_allclose(cm[core], y[core] / 2, atol=1e-6)

    def test_score_unbiased(self, prior_grid):
        for model, prior in [(builtin_ou(1.0), mixture_prior(prior_grid)),
                             (builtin_gbm(0.1, 0.5), gbm_prior())]:
            j = build_joint(prior, model, None, 1.0)
            p_y = j.marginal_xt().values * j.grid_xt.jacobian
            probe = p_y > 1e-4 * p_y.max()
            assert np.max(np.abs(score_unbiasedness_gap(j, model.kernel)[probe])) <= 1e-4

    def test_statistical_fisher_decreases_with_prior_width(self, bm, prior_grid):
        narrow = build_joint(gaussian_density(0, 0.25, prior_grid), bm, None, 1.0)
        wide = build_joint(gaussian_density(0, 1.0, prior_grid), bm, None, 1.0)
        assert statistical_fisher_b(narrow) < statistical_fisher_b(wide)

    def test_pointwise_statistical_fisher_nonnegative(self, bm_joint):
        assert np.all(pointwise_statistical_fisher(bm_joint) >= -1e-10)
