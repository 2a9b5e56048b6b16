import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpolymer import mellin
from dpolymer.errors import CapabilityError, DomainError

from conftest import a_grid, five_families, interior_a

EULER_GAMMA = 0.5772156649015329


class TestClosedForms:
    def test_exp_decay_gamma_value(self):
        # Gamma(3) = 2
        assert mellin.mellin_transform(mellin.exp_decay(1.0), 3.0) == pytest.approx(2.0, rel=1e-14)

    def test_beta_uniform_value(self):
        # B(1,1) = 1: the uniform density
        assert mellin.mellin_transform(mellin.beta_kernel(1.0), 1.0) == pytest.approx(1.0, rel=1e-14)

    def test_beta_prime_quadrature_value(self):
        # int_0^inf x^{-2} (x/(1+x))^2 dx = B(1,1) = 1, checked against the quad oracle
        fam = mellin.beta_prime_kernel(2.0)
        closed = mellin.mellin_transform(fam, -1.0)
        oracle = mellin.mellin_transform_quad(fam, -1.0)
        assert closed == pytest.approx(1.0, rel=1e-12)
        assert closed == pytest.approx(oracle, rel=1e-10)

    @pytest.mark.parametrize("family", five_families(), ids=lambda f: f.label())
    def test_closed_form_matches_quadrature_on_grid(self, family):
        for a in a_grid(family):
            closed = mellin.mellin_transform(family, a)
            oracle = mellin.mellin_transform_quad(family, a)
            assert closed == pytest.approx(oracle, rel=1e-9), f"a={a}"

    def test_domain_error_names_interval(self):
        with pytest.raises(DomainError, match=r"\(0.0, inf\)"):
            mellin.mellin_transform(mellin.exp_decay(1.0), -1.0)
        with pytest.raises(DomainError):
            mellin.mellin_transform(mellin.beta_prime_kernel(2.0), -2.0)

    def test_endpoint_is_error_not_limit(self):
        with pytest.raises(DomainError):
            mellin.mellin_transform(mellin.exp_decay(1.0), 0.0)
        with pytest.raises(DomainError):
            mellin.mellin_transform(mellin.beta_prime_kernel(2.0), 0.0)


class TestPsi:
    def test_exp_decay_mean_is_digamma(self):
        fam = mellin.exp_decay(1.0)
        assert mellin.psi(fam, 0, 1.0) == pytest.approx(-EULER_GAMMA, abs=1e-12)
        # quadrature oracle for E[log X], X ~ Exp(1)
        assert mellin.psi(fam, 0, 1.0) == pytest.approx(
            mellin.log_moment_quad(fam, 1.0, 1), abs=1e-10
        )

    def test_exp_decay_variance_is_trigamma(self):
        fam = mellin.exp_decay(1.0)
        assert mellin.psi(fam, 1, 1.0) == pytest.approx(math.pi ** 2 / 6, rel=1e-12)
        var_quad = mellin.log_moment_quad(fam, 1.0, 2, center=mellin.psi(fam, 0, 1.0))
        assert mellin.psi(fam, 1, 1.0) == pytest.approx(var_quad, rel=1e-10)

    def test_log_inverse_flips_mean_keeps_variance(self):
        fam = mellin.exp_decay_inv(1.0)
        assert mellin.psi(fam, 1, -1.0) == pytest.approx(math.pi ** 2 / 6, rel=1e-12)
        assert mellin.psi(fam, 0, -1.0) == pytest.approx(EULER_GAMMA, abs=1e-12)

    @pytest.mark.parametrize("family", five_families(), ids=lambda f: f.label())
    @pytest.mark.parametrize("k", [0, 1, 2, 3])
    def test_psi_matches_contour_derivative(self, family, k):
        for a in a_grid(family, npts=5):
            oracle = mellin.log_mellin_derivative_contour(family, a, k + 1)
            assert mellin.psi(family, k, a) == pytest.approx(oracle, rel=1e-5, abs=1e-9)

    @pytest.mark.parametrize("family", five_families(), ids=lambda f: f.label())
    @pytest.mark.parametrize("k", [4, 5, 6])
    def test_psi_higher_orders(self, family, k):
        # the polynomial recursions consume psi up to index n-1; keep the
        # ladder honest beyond the acceptance window as well
        a = interior_a(family)
        oracle = mellin.log_mellin_derivative_contour(family, a, k + 1)
        assert mellin.psi(family, k, a) == pytest.approx(oracle, rel=1e-6, abs=1e-8)

    @pytest.mark.parametrize("family", five_families(), ids=lambda f: f.label())
    def test_psi_matches_real_fd(self, family):
        a = interior_a(family)
        for k in (0, 1):
            fd = mellin.log_mellin_derivative_fd(family, a, k + 1)
            assert mellin.psi(family, k, a) == pytest.approx(fd, rel=1e-6, abs=1e-8)

    @pytest.mark.parametrize("family", five_families(), ids=lambda f: f.label())
    def test_variance_positive_on_grid(self, family):
        for a in a_grid(family):
            assert mellin.psi(family, 1, a) > 0

    def test_unsupported_order_raises(self):
        with pytest.raises(CapabilityError):
            mellin.psi(mellin.exp_decay(1.0), mellin.PSI_MAX_ORDER + 1, 1.0)


class TestDensity:
    def test_uniform_density(self):
        assert mellin.density(mellin.beta_kernel(1.0), 1.0, 0.3) == pytest.approx(1.0, rel=1e-14)

    def test_exponential_density(self):
        val = mellin.density(mellin.exp_decay(1.0), 1.0, 2.0)
        assert val == pytest.approx(math.exp(-2.0), rel=1e-13)

    def test_off_support_is_zero(self):
        assert mellin.density(mellin.beta_inv_kernel(2.0), -3.0, 0.5) == 0.0
        assert mellin.density(mellin.beta_kernel(2.0), 1.0, 1.5) == 0.0

    @pytest.mark.parametrize("family", five_families(), ids=lambda f: f.label())
    def test_density_integrates_to_one(self, family):
        for a in a_grid(family, npts=5):
            assert mellin.density_norm_quad(family, a) == pytest.approx(1.0, abs=1e-8)


class TestLogMoments:
    @pytest.mark.parametrize("family", five_families(), ids=lambda f: f.label())
    def test_zeroth_moment(self, family):
        assert mellin.log_moment(family, interior_a(family), 0) == 1.0

    def test_exp_decay_first_and_second(self):
        fam = mellin.exp_decay(1.0)
        assert mellin.log_moment(fam, 1.0, 1) == pytest.approx(-EULER_GAMMA, abs=1e-12)
        expected = math.pi ** 2 / 6 + EULER_GAMMA ** 2
        assert mellin.log_moment(fam, 1.0, 2) == pytest.approx(expected, rel=1e-12)
        # independent oracle: int (log x)^2 e^{-x} dx
        assert mellin.log_moment(fam, 1.0, 2) == pytest.approx(
            mellin.log_moment_quad(fam, 1.0, 2), rel=1e-10
        )

    @pytest.mark.parametrize("family", five_families(), ids=lambda f: f.label())
    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_moments_match_quadrature(self, family, k):
        a = interior_a(family)
        assert mellin.log_moment(family, a, k) == pytest.approx(
            mellin.log_moment_quad(family, a, k), rel=1e-8, abs=1e-10
        )


class TestKernelShape:
    @pytest.mark.parametrize("family", five_families(), ids=lambda f: f.label())
    def test_r_matches_numeric_dlogf(self, family):
        lo, hi = family.support()
        xs = np.linspace(max(lo, 0.05) + 0.07, min(hi, 3.0) - 0.04, 9)
        for x in xs:
            h = 1e-6 * max(1.0, x)
            num = (family.log_f(x + h) - family.log_f(x - h)) / (2 * h)
            assert family.r(x) == pytest.approx(x * num, rel=1e-6, abs=1e-8)

    @pytest.mark.parametrize("family", five_families(), ids=lambda f: f.label())
    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_x_dr_matches_numeric(self, family, order):
        lo, hi = family.support()
        xs = np.linspace(max(lo, 0.05) + 0.11, min(hi, 3.0) - 0.06, 5)
        for x in xs:
            h = 1e-4 * max(1.0, x)
            if order == 1:
                prev = lambda y: family.r(y)
            else:
                prev = lambda y: family.x_dr(y, order - 1)
            num = x * (prev(x + h) - prev(x - h)) / (2 * h)
            assert family.x_dr(x, order) == pytest.approx(num, rel=5e-5, abs=1e-7)

    def test_beta_prime_r_uniformly_bounded(self):
        fam = mellin.beta_prime_kernel(2.0)
        xs = np.geomspace(1e-8, 1e8, 200)
        assert np.all(np.abs(fam.r(xs)) <= fam.b + 1e-12)


@given(a=st.floats(0.2, 8.0), b=st.floats(0.3, 5.0))
@settings(max_examples=30, deadline=None)
def test_psi1_positive_hypothesis(a, b):
    for fam in (mellin.exp_decay(b), mellin.beta_kernel(b)):
        assert mellin.psi(fam, 1, a) > 0
    for fam in (mellin.exp_decay_inv(b), mellin.beta_inv_kernel(b)):
        assert mellin.psi(fam, 1, -a) > 0


@given(frac=st.floats(0.05, 0.95), b=st.floats(0.5, 4.0))
@settings(max_examples=20, deadline=None)
def test_beta_prime_domain_scales_with_b(frac, b):
    fam = mellin.beta_prime_kernel(b)
    a = -b * frac
    assert fam.contains(a)
    assert mellin.mellin_transform(fam, a) > 0
