import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import beta

from gfbm.core import GfbmParams
from gfbm.errors import BandOutOfTable, NonPositiveValues, OutOfRange, ValidationError
from gfbm.lamperti import (
    BandSpec,
    band_residual_variance,
    build_table,
    choose_t_max,
    default_lambdas,
    filon_cos,
    low_second_moment,
    r_u,
    r_u_decay_check,
    r_u_values,
    spectral_density,
    t_mesh,
    tail_mass,
)

from oracles import lorentzian, lorentzian_tail_mass, r_u_hyp2f1, spectral_qawf

BM = GfbmParams(0.0, 0.0)
P04 = GfbmParams(0.0, 0.4)
MIXED = [GfbmParams(0.25, 0.5), GfbmParams(0.2, 0.4), GfbmParams(-0.1, 0.4), GfbmParams(0.2, 0.3), GfbmParams(0.6, 0.5)]


@pytest.fixture(scope="module")
def table04():
    return build_table(P04, 200.0, 4001)


class TestRU:
    def test_beta_value(self):
        assert r_u(GfbmParams(0.25, 0.5), 0.0) == pytest.approx(math.pi / 2, rel=1e-9)

    def test_exponential(self):
        assert r_u(P04, 2.0) == pytest.approx(math.exp(-0.6) / 0.6, rel=1e-12)
        for t in [0.0, 0.5, 7.0, -3.0]:
            assert r_u(P04, t) == pytest.approx(math.exp(-0.3 * abs(t)) / 0.6, rel=1e-12)

    @pytest.mark.parametrize("p", MIXED)
    def test_beta_identity(self, p):
        assert r_u(p, 0) == pytest.approx(beta(1 - p.gamma, 2 * p.alpha + 1), rel=1e-8)

    @pytest.mark.parametrize("p", MIXED)
    def test_hypergeometric_oracle(self, p):
        for t in [0.1, 1.0, 5.0]:
            assert r_u(p, t) == pytest.approx(r_u_hyp2f1(p.alpha, p.gamma, t), rel=1e-10)

    @given(st.sampled_from(MIXED), st.floats(0, 30))
    def test_even(self, p, t):
        assert r_u(p, -t) == r_u(p, t)

    @pytest.mark.parametrize("p", MIXED)
    def test_batch_matches_scalar(self, p):
        t = np.array([0.0, 1e-5, 0.3, 4.0, 25.0])
        ref = np.array([r_u(p, x) for x in t])
        np.testing.assert_allclose(r_u_values(p, t), ref, rtol=1e-9)


class TestDecay:
    def test_exact_rates(self):
        t = np.linspace(5, 40, 15)
        assert r_u_decay_check(P04, t) == pytest.approx(-0.3, abs=1e-10)
        assert r_u_decay_check(BM, t) == pytest.approx(-0.5, abs=1e-10)

    def test_bound(self):
        assert r_u_decay_check(GfbmParams(0.25, 0.5), np.linspace(5, 40, 15)) <= -0.25 + 0.05

    def test_range(self):
        with pytest.raises(ValidationError):
            r_u_decay_check(P04, [1.0, 10.0])

    def test_nonpositive(self, monkeypatch):
        import gfbm.lamperti as lam

        monkeypatch.setattr(lam, "r_u", lambda p, t: -1.0)
        with pytest.raises(NonPositiveValues):
            lam.r_u_decay_check(P04, [5.0, 6.0])


class TestFilon:
    def test_mesh(self):
        t = t_mesh(50.0, 0.01)
        assert t[0] == 0 and t[-1] == 50.0 and np.all(np.diff(t) > 0)
        assert np.diff(t).max() <= 0.01 + 1e-12

    def test_exact_on_exponential(self):
        t = t_mesh(60.0, 0.01)
        lam = np.array([0.0, 0.7, 13.0, 90.0])
        got = filon_cos(t, np.exp(-t), lam)
        expect = (1 - np.exp(-60) * (np.cos(60 * lam) - lam * np.sin(60 * lam))) / (1 + lam**2)
        # linear interpolation error bound: dt^2/8 * int |r''|
        np.testing.assert_allclose(got, expect, rtol=0, atol=0.01**2 / 8)

    def test_default_lambdas(self):
        lam = default_lambdas(200.0, 4001)
        assert lam.size == 4001 and lam[0] == 0 and lam[-1] == pytest.approx(200.0)
        assert np.all(np.diff(lam) > 0)
        assert np.sum(lam <= 1.0) == 1001
        assert default_lambdas(20.0, 201).size == 201
        with pytest.raises(ValidationError):
            default_lambdas(20.0, 2)

    def test_t_max_choice(self):
        assert 10 <= choose_t_max(P04) <= 400


class TestSpectralDensity:
    def test_lorentzian_points(self):
        assert spectral_density(P04, 0.0) == pytest.approx(0.3 / (0.6 * math.pi * 0.09), rel=1e-5)
        assert spectral_density(P04, 1.0) == pytest.approx(0.3 / (0.6 * math.pi * 1.09), rel=1e-5)
        assert spectral_density(BM, 0.0) == pytest.approx(2 / math.pi, rel=1e-5)

    @pytest.mark.parametrize("gamma", [0.0, 0.4])
    def test_lorentzian_sup(self, gamma):
        lam = np.linspace(0, 50, 2001)
        f = spectral_density(GfbmParams(0.0, gamma), lam)
        assert np.max(np.abs(f - lorentzian(gamma, lam))) < 1e-4

    @pytest.mark.parametrize("p", [GfbmParams(0.2, 0.4), GfbmParams(-0.1, 0.4)])
    def test_qawf_oracle(self, p):
        for lam in [0.0, 0.5, 3.0, 20.0]:
            assert spectral_density(p, lam) == pytest.approx(spectral_qawf(p.alpha, p.gamma, lam), abs=1e-5)

    def test_array_and_even(self):
        lam = np.array([[0.5, 1.0], [2.0, 3.0]])
        f = spectral_density(P04, lam)
        assert f.shape == (2, 2)
        np.testing.assert_allclose(spectral_density(P04, -lam), f)


class TestTable:
    def test_nonnegative_and_mass(self, table04):
        assert np.all(table04.densities >= -1e-8)
        assert table04.mass() == pytest.approx(table04.r0, rel=1e-2)
        assert tail_mass(table04, 0.0) == pytest.approx(table04.r0, rel=1e-2)

    def test_tail_mass_closed_form(self, table04):
        assert lorentzian_tail_mass(0.4, 3.0) == pytest.approx((1 / 0.6) * (2 / math.pi) * math.atan(0.1), rel=1e-12)
        for u in [0.5, 3.0, 30.0, 100.0]:
            assert tail_mass(table04, u) == pytest.approx(lorentzian_tail_mass(0.4, u), rel=1e-3)

    def test_tail_slope(self, table04):
        u = np.geomspace(10, 100, 9)
        m = [tail_mass(table04, x) for x in u]
        slope = np.polyfit(np.log(u), np.log(m), 1)[0]
        assert slope == pytest.approx(-1.0, abs=0.05)

    def test_low_second_moment_closed_form(self, table04):
        # 2 int_0^u lam^2 rho/(pi (1-g)(rho^2+lam^2)) = 2 rho/(pi (1-g)) (u - rho atan(u/rho))
        rho = 0.3
        for u in [1.0, 10.0, 100.0]:
            exact = 2 * rho / (math.pi * 0.6) * (u - rho * math.atan(u / rho))
            assert low_second_moment(table04, u) == pytest.approx(exact, rel=1e-3)

    def test_monotone(self, table04):
        u = np.linspace(0, 200, 41)
        tm = np.array([tail_mass(table04, x) for x in u])
        lm = np.array([low_second_moment(table04, x) for x in u])
        assert np.all(np.diff(tm) <= 0) and np.all(np.diff(lm) >= 0)

    def test_out_of_range(self, table04):
        with pytest.raises(OutOfRange):
            tail_mass(table04, 250.0)
        with pytest.raises(OutOfRange):
            low_second_moment(table04, -1.0)

    @pytest.mark.parametrize("alpha", [-0.1, 0.0, 0.2])
    def test_power_law_envelopes_bounded(self, alpha):
        t = build_table(GfbmParams(alpha, 0.4))
        u = np.geomspace(10, 100, 9)
        a = np.array([tail_mass(t, x) * x ** (2 * alpha + 1) for x in u])
        b = np.array([low_second_moment(t, x) * x ** (2 * alpha - 1) for x in u])
        assert a.max() / a.min() < 10 and b.max() / b.min() < 10


class TestBands:
    def test_cutoffs(self):
        b = BandSpec.from_index(3, 0.5)
        assert b.d_hi == pytest.approx(math.exp(3**1.5 + 3**0.5))
        assert b.d_lo == pytest.approx(math.exp(2**1.5 + 2**0.5))
        assert b.h == pytest.approx(math.exp(-(3**1.5)))
        with pytest.raises(ValidationError):
            BandSpec.from_index(2, 0.5)
        with pytest.raises(ValidationError):
            BandSpec.surrogate(10, 5)

    def test_zero_increment(self, table04):
        r = band_residual_variance(P04, BandSpec.surrogate(10, 100), 1.0, 0.0, table04)
        assert r.J1_bound_part == 0.0 and r.J2_part == 0.0

    def test_j2_closed_form(self, table04):
        r = band_residual_variance(P04, BandSpec.surrogate(10, 100), 1.0, 1e-3, table04)
        tm = lorentzian_tail_mass(0.4, 100.0)
        assert tm == pytest.approx(0.00318309, rel=1e-5)
        bound = 2 * (1 + 1.001**0.6) * tm / 2
        assert r.J2_part == pytest.approx(bound, rel=1e-3)
        assert r.J1_bound_part > 0

    def test_j2_nonincreasing(self, table04):
        vals = [band_residual_variance(P04, BandSpec.surrogate(5, d), 1.0, 1e-3, table04).J2_part for d in (10, 20, 50, 100, 200)]
        assert np.all(np.diff(vals) <= 0)

    def test_out_of_table(self, table04):
        with pytest.raises(BandOutOfTable):
            band_residual_variance(P04, BandSpec.from_index(3, 0.5), 1.0, 1e-3, table04)

    def test_j1_against_direct_lorentzian(self, table04):
        # J1 = 2 int_0^d |a e^{i l ln(t+s)} - b e^{i l ln t}|^2 f
        from scipy.integrate import quad

        H = P04.hurst
        t0, s, d = 1.0, 0.05, 10.0
        a, b = (t0 + s) ** H, t0**H
        dl = math.log1p(s / t0)
        f = lambda l: (a * a + b * b - 2 * a * b * math.cos(l * dl)) * lorentzian(0.4, l)
        ref = 2 * quad(f, 0, d, epsabs=1e-14)[0]
        r = band_residual_variance(P04, BandSpec.surrogate(d, 100), t0, s, table04)
        assert r.J1_bound_part == pytest.approx(ref, rel=1e-3)
