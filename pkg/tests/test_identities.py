import math

import numpy as np
import pytest

from conftest import gbm_prior, mixture_prior, rel, std_normal
from fokkerlab.errors import PreconditionError, UnsupportedModelError
from fokkerlab.grid import gaussian_density, lognormal_density, make_log_grid, make_uniform_grid
from fokkerlab.identities import (
    CHECK_NAMES,
    CURVE_COLUMNS,
    CurvePoint,
    DEFAULT_TOLERANCES,
    curve_to_csv,
    entropy_rate_rhs,
    immse_coefficient,
    immse_curve,
    run_checks,
    verify_entropy_rate,
    verify_fisher_bridge,
    verify_immse_curve,
    verify_kl_rate,
    verify_mi_rate,
    verify_mmse_bridge,
    verify_ou_fisher_bound,
    verify_van_trees,
)
from fokkerlab.infofun import build_joint, fisher_b, mmse_b, model_weight
from fokkerlab.process import TransitionKernel, builtin_gbm, make_custom_model
from fokkerlab.report import IdentityReport


@pytest.fixture(scope="module")
def bm_joint(bm, prior_grid):
    return build_joint(std_normal(prior_grid), bm, None, 1.0)


class TestEntropyRate:
    def test_bm_de_bruijn(self, bm, line_grid):
        r = verify_entropy_rate(bm, std_normal(line_grid), 1.0, h=1e-3)
        assert r.passed
        assert rel(r.lhs, 0.25) <= 1e-3 and rel(r.rhs, 0.25) <= 1e-3
        assert r.rel_err <= 1e-3
        assert "lhs_h_half" in r.params

    def test_ou_rhs_is_half_fisher_minus_alpha(self, ou, line_grid):
        r = verify_entropy_rate(ou, std_normal(line_grid), 0.5)
        assert r.passed
        # N(0,1) is invariant in variance only at alpha=1/2; here var(t)=(1+e^{-2t})/2
        var = 0.5 * (1 + math.exp(-1.0))
        assert rel(r.rhs, 0.5 / var - 1.0) <= 1e-3
        assert r.rhs < 0  # contracting regime: entropy decreases

    def test_gbm_correction_term(self):
        m = builtin_gbm(0.3, 1.0)
        g = make_log_grid(math.exp(-10), math.exp(12), 1025)
        p0 = lognormal_density(0.0, 0.25, g)
        r = verify_entropy_rate(m, p0, 1.0)
        assert r.passed
        from fokkerlab.fpsolver import SolveSpec, solve
        p1 = solve(SolveSpec(m, p0, 1.0)).fields[-1]
        jb = fisher_b(p1, model_weight(m), 1.0)
        # mean drift correction for a' - b''/2 = mu - sigma^2
        assert rel(entropy_rate_rhs(m, p1, 1.0), 0.5 * jb + 0.3 - 1.0) <= 1e-6

    def test_step_preconditions(self, bm, line_grid):
        with pytest.raises(PreconditionError):
            verify_entropy_rate(bm, std_normal(line_grid), 1.0, h=1.0)
        with pytest.raises(PreconditionError):
            verify_entropy_rate(bm, std_normal(line_grid), 0.0)


class TestKlRate:
    def test_bm_gaussians(self, bm, line_grid):
        r = verify_kl_rate(bm, std_normal(line_grid), gaussian_density(1, 1, line_grid), 1.0, h=1e-3)
        assert r.passed and r.rel_err <= 1e-3
        assert rel(r.lhs, -0.125) <= 1e-3
        assert r.lhs <= 1e-6

    def test_ou_decreasing(self, ou, line_grid):
        p0, q0 = gaussian_density(0, 1, line_grid), gaussian_density(1.5, 0.5, line_grid)
        rates = [verify_kl_rate(ou, p0, q0, t) for t in (0.25, 1.0, 2.0)]
        assert all(r.passed and r.lhs < 0 for r in rates)
        kls = [r.params["kl_t"] for r in rates]
        assert kls == sorted(kls, reverse=True)

    def test_identical_inputs(self, bm, line_grid):
        p = std_normal(line_grid)
        r = verify_kl_rate(bm, p, p, 1.0)
        assert abs(r.lhs) <= 1e-8 and abs(r.rhs) <= 1e-8
        assert r.passed


class TestMiRate:
    def test_bm(self, bm, prior_grid):
        r = verify_mi_rate(bm, std_normal(prior_grid), 1.0)
        assert r.passed and rel(r.lhs, -0.25) <= 1e-2 and rel(r.rhs, -0.25) <= 1e-2

    def test_ou_rhs(self, ou, prior_grid):
        r = verify_mi_rate(ou, std_normal(prior_grid), 1.0)
        var = 0.5 * (1 + math.exp(-2.0))  # alpha=1: e^{-2}*1 + (1-e^{-2})/2
        expected = -0.5 * (2 / (1 - math.exp(-2.0)) - 1 / var)
        assert r.passed and rel(r.rhs, expected) <= 1e-3

    def test_gbm_matches_log_mmse(self, gbm):
        prior = gbm_prior()
        r = verify_mi_rate(gbm, prior, 1.0)
        j = build_joint(prior, gbm, None, 1.0)
        predicted = immse_coefficient(gbm, 1.0) * mmse_b(j, lambda x0, y: np.log(x0))
        assert r.passed and rel(r.lhs, predicted) <= 2e-2

    def test_requires_kernel(self, prior_grid):
        m = make_custom_model("-x", "1")
        with pytest.raises(UnsupportedModelError):
            verify_mi_rate(m, std_normal(prior_grid), 1.0)


class TestBridges:
    def test_fisher_bridge_bm(self, bm_joint):
        r = verify_fisher_bridge(bm_joint)
        assert r.passed and rel(r.lhs, 0.5) <= 1e-3 and rel(r.rhs, 0.5) <= 1e-3

    def test_fisher_bridge_ou_mixture(self, ou, prior_grid):
        j = build_joint(mixture_prior(prior_grid), ou, None, 0.7)
        assert verify_fisher_bridge(j, model_weight(ou)).passed

    def test_fisher_bridge_independent(self, prior_grid):
        flat = TransitionKernel(
            density=lambda x0, y, t: np.exp(-y ** 2 / 2) / math.sqrt(2 * math.pi) + 0 * x0,
            score=lambda x0, y, t: -y + 0 * x0,
            output_range=lambda lo, hi, t, w: (-w, w),
        )
        r = verify_fisher_bridge(build_joint(std_normal(prior_grid), flat, None, 1.0))
        assert abs(r.lhs) <= 1e-4 and abs(r.rhs) <= 1e-4

    def test_mmse_bridge_bm_reduces_to_scaled_mmse(self, bm, bm_joint):
        r = verify_mmse_bridge(bm_joint, bm.kernel)
        assert r.passed
        assert rel(r.rhs, mmse_b(bm_joint, lambda x0, y: x0)) <= 1e-3  # 1/t^2 = 1

    def test_mmse_bridge_ou_coefficient(self, ou, prior_grid):
        t = 1.0
        j = build_joint(std_normal(prior_grid), ou, None, t)
        r = verify_mmse_bridge(j, ou.kernel, model_weight(ou))
        c = 2 * math.exp(-t) / (1 - math.exp(-2 * t))
        assert r.passed and rel(r.rhs, c * c * mmse_b(j, lambda x0, y: x0)) <= 1e-3

    def test_mmse_bridge_gbm(self, gbm):
        j = build_joint(gbm_prior(), gbm, None, 1.0)
        assert verify_mmse_bridge(j, gbm.kernel, model_weight(gbm)).passed

    def test_mmse_bridge_needs_score(self, bm_joint):
        with pytest.raises(UnsupportedModelError):
            verify_mmse_bridge(bm_joint, None)


class TestVanTrees:
    def test_gaussian_equality(self, bm_joint):
        r = verify_van_trees(bm_joint)
        assert r.passed and r.relation == "ge"
        assert abs(r.lhs - 0.5) <= 1e-3 and abs(r.rhs - 0.5) <= 1e-3
        assert r.params["sub_identity_rel_err"] <= 1e-3

    def test_zero_estimator(self, bm_joint):
        def zero(y):
            return np.zeros_like(y)
        r = verify_van_trees(bm_joint, estimator=zero)
        assert r.passed and rel(r.lhs, 1.0) <= 1e-3  # E[X0^2] / b
        assert r.lhs > r.rhs + 0.4

    def test_ou_slack(self, ou, prior_grid):
        j = build_joint(std_normal(prior_grid), ou, None, 0.5)
        r = verify_van_trees(j, model_weight(ou))
        assert r.passed and r.params["slack"] >= -1e-6

    def test_mixture_strict(self, bm, prior_grid):
        j = build_joint(mixture_prior(prior_grid), bm, None, 1.0)
        r = verify_van_trees(j)
        assert r.passed and r.params["slack"] > 1e-4

    def test_bad_estimator(self, bm_joint):
        with pytest.raises(Exception):
            verify_van_trees(bm_joint, estimator="median")


class TestImmse:
    def test_bm_curve(self, bm, prior_grid):
        pts = immse_curve(bm, std_normal(prior_grid), [0.5, 1.0, 2.0])
        assert [p.t for p in pts] == [0.5, 1.0, 2.0]
        assert rel(pts[1].predicted_rate, -0.25) <= 1e-3
        assert all(rel(p.mi_rate, p.predicted_rate) <= 2e-2 for p in pts)
        assert pts[0].mi > pts[1].mi > pts[2].mi

    def test_ou_coefficient(self, ou):
        e = math.exp(-2)
        assert immse_coefficient(ou, 1.0) == pytest.approx(-2 * e / (1 - e) ** 2)
        assert immse_coefficient(ou, 1.0) == pytest.approx(-0.3620, abs=1e-4)

    def test_gbm_curve(self, gbm):
        r = verify_immse_curve(gbm, gbm_prior(), [0.5, 1.0, 2.0])
        assert r.passed

    def test_preconditions(self, bm, prior_grid):
        p = std_normal(prior_grid)
        with pytest.raises(PreconditionError):
            immse_curve(bm, p, [0.0, 1.0])
        with pytest.raises(PreconditionError):
            immse_curve(bm, p, [2.0, 1.0])
        with pytest.raises(PreconditionError):
            immse_curve(bm, p, [])
        with pytest.raises(UnsupportedModelError):
            immse_coefficient(make_custom_model("-x", "1"), 1.0)

    def test_curve_point_validation(self):
        with pytest.raises(Exception):
            CurvePoint(0.0, 1, 1, 1, 1)
        with pytest.raises(Exception):
            CurvePoint(1.0, float("nan"), 1, 1, 1)

    def test_csv(self):
        text = curve_to_csv([CurvePoint(1.0, 0.5, -0.25, 0.5, -0.25)])
        assert text.splitlines()[0] == ",".join(CURVE_COLUMNS)
        assert text == "t,mi,mi_rate,mmse,predicted_rate\n1,0.5,-0.25,0.5,-0.25\n"


class TestOuFisherBound:
    def test_wide_prior(self, prior_grid):
        r = verify_ou_fisher_bound(1.0, gaussian_density(0, 4, make_uniform_grid(-16, 16, 801)), [1.0])
        assert r.passed and r.params["min_slack"] > 0.1

    def test_stationary_prior(self, prior_grid):
        r = verify_ou_fisher_bound(1.0, gaussian_density(0, 0.5, prior_grid), [0.5, 1, 2])
        assert r.passed and r.lhs == pytest.approx(2.0, rel=1e-3)

    def test_sweep_gap_shrinks(self, prior_grid):
        p = std_normal(prior_grid)
        ts = [0.25, 1.0, 4.0, 8.0]
        slacks = [verify_ou_fisher_bound(1.0, p, [t]).params["min_slack"] for t in ts]
        assert all(s >= -1e-4 for s in slacks)
        assert slacks == sorted(slacks, reverse=True)
        assert slacks[-1] < 1e-4


class TestHarness:
    def test_sorted_and_thread_independent(self, bm_joint):
        checks = {
            "z": lambda: verify_fisher_bridge(bm_joint, label="z"),
            "a": lambda: verify_van_trees(bm_joint, label="a"),
            "m": lambda: verify_fisher_bridge(bm_joint, label="m"),
        }
        one = run_checks(checks, threads=1)
        many = run_checks(checks, threads=3)
        assert [r.name for r in one] == sorted(r.name for r in one)
        assert [(r.name, r.lhs, r.rhs) for r in one] == [(r.name, r.lhs, r.rhs) for r in many]

    def test_same_method_rejected(self):
        with pytest.raises(ValueError):
            IdentityReport("x", 1.0, 1.0, 1e-3, "quadrature", "quadrature")

    def test_default_tolerances(self):
        assert set(CHECK_NAMES) == set(DEFAULT_TOLERANCES)
        assert DEFAULT_TOLERANCES["fisher_bridge"] == 1e-3
        assert DEFAULT_TOLERANCES["entropy_rate"] == 1e-2
