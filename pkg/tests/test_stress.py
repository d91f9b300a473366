import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sint
from scipy import stats

from divgen.aed import MDPDE, TIE, UMVUE
from divgen.errors import DomainError
from divgen.families import sigma_star
from divgen.stress import (
    CURVE_COLUMNS,
    StressStrengthModel,
    aed_closed_form,
    aed_cross_check,
    aed_generic,
    curve_rows,
    decide,
    empirical_deficiency,
    estimators,
    reliability,
    risk_mdpde,
    risk_umvue,
    threshold,
)

MU_GRID = np.round(np.arange(-3.0, 3.0 + 1e-9, 0.1), 10)


def sigma_star_mp(nu):
    """Direct high-precision evaluation of the sigma* formula."""
    mp.mp.dps = 40
    nu = mp.mpf(nu)
    a = 1 - 2 / (nu + 1)
    ratio = mp.exp(mp.loggamma((nu + 1) / 2) - mp.loggamma(nu / 2)) / mp.sqrt(mp.pi)
    inner = 2 * a / (1 - a) * nu ** (-(1 + a) / 2) * ratio ** (a - 1)
    return float(inner ** mp.mpf(-0.5))


class TestSigmaStar:
    def test_nu3(self):
        s = sigma_star(3)
        assert s == pytest.approx(0.9536, abs=5e-4)
        assert s == pytest.approx(sigma_star_mp(3), rel=1e-14)
        # nu = 3: 2 * 3^(-3/4) * (Gamma(2) / (Gamma(1.5) sqrt(pi)))^(-1/2), then inverse square root
        direct = (2 * 3 ** -0.75 * (1 / (math.gamma(1.5) * math.sqrt(math.pi))) ** -0.5) ** -0.5
        assert s == pytest.approx(direct, rel=1e-14)

    @pytest.mark.parametrize("nu", range(3, 31))
    def test_against_mpmath_and_window(self, nu):
        s = sigma_star(nu)
        assert s == pytest.approx(sigma_star_mp(nu), rel=1e-13)
        assert 0.9 < s < 1.05

    def test_dips_below_095_at_nu4(self):
        assert sigma_star(4) < 0.95
        assert all(0.95 < sigma_star(nu) < 1.0 for nu in range(5, 31))
        assert 0.95 < sigma_star(3) < 1.0

    def test_not_monotone_at_small_nu(self):
        assert sigma_star(3) > sigma_star(5)
        vals = [sigma_star(nu) for nu in (5, 10, 30)]
        assert vals == sorted(vals)
        assert sigma_star(1e6) == pytest.approx(1.0, abs=1e-4)

    @pytest.mark.parametrize("nu", [2, 1.5, -1])
    def test_domain(self, nu):
        with pytest.raises(DomainError):
            sigma_star(nu)

    def test_model(self):
        m = StressStrengthModel.from_nu(3, 0.5)
        assert m.sigma_star == sigma_star(3) and m.alpha == pytest.approx(0.5)
        assert StressStrengthModel.synthetic(1.0, 2.0).nu is None
        with pytest.raises(DomainError):
            StressStrengthModel.synthetic(0.0, 1.0)


class TestReliability:
    def test_values(self):
        s = sigma_star(3)
        assert reliability(0.0, s) == 0.5
        assert reliability(math.sqrt(2) * s, s) == pytest.approx(0.841344746068543, rel=1e-15)

    def test_phi_against_mpmath(self):
        from divgen.numerics import norm_cdf

        mp.mp.dps = 30
        central = np.linspace(-3, 3, 601)
        ref = np.array([float(mp.ncdf(mp.mpf(float(z)))) for z in central])
        assert np.max(np.abs(norm_cdf(central) - ref) / ref) <= 1e-15
        tails = np.linspace(-37, 8, 451)
        ref = np.array([float(mp.ncdf(mp.mpf(float(z)))) for z in tails])
        assert np.max(np.abs(norm_cdf(tails) - ref) / ref) <= 1e-15

    def test_central_range(self):
        mp.mp.dps = 30
        s = 0.97
        mu = np.linspace(-4, 4, 161)
        args = mu / (math.sqrt(2.0) * s)
        ref = np.array([float(mp.ncdf(mp.mpf(float(a)))) for a in args])
        assert np.max(np.abs(reliability(mu, s) - ref) / ref) <= 1e-15

    def test_monotone_limit(self):
        vals = reliability(np.linspace(-5, 40, 200), 0.97)
        assert np.all(np.diff(vals) >= 0) and vals[-1] == 1.0

    def test_bad_sigma(self):
        with pytest.raises(DomainError):
            reliability(0.0, -1.0)


class TestEstimators:
    def test_symmetry(self):
        m = StressStrengthModel.from_nu(3, 0.0)
        assert estimators(m, 0.0, 10) == (0.5, 0.5)

    def test_converge(self):
        m = StressStrengthModel.from_nu(5, 0.0)
        a, b = estimators(m, 0.7, 10**9)
        assert a == pytest.approx(b, abs=1e-9)
        with pytest.raises(DomainError):
            estimators(m, 0.0, 0)

    def test_vectorized(self):
        m = StressStrengthModel.from_nu(3, 0.0)
        a, b = estimators(m, np.array([-1.0, 0.0, 1.0]), 5)
        assert a.shape == b.shape == (3,)

    @pytest.mark.parametrize("mu", [0.0, 1.0, 2.0])
    @pytest.mark.parametrize("n", [5, 20, 100])
    def test_umvue_unbiased(self, mu, n):
        s = sigma_star(3)
        m = StressStrengthModel(3.0, mu, s)
        sd = s / math.sqrt(n)
        val, _ = sint.quad(lambda t: estimators(m, t, n)[1] * stats.norm.pdf(t, mu, sd), mu - 15 * sd, mu + 15 * sd,
                           epsabs=1e-14, epsrel=1e-13, limit=200)
        assert val == pytest.approx(stats.norm.cdf(mu / (math.sqrt(2) * s)), abs=1e-8)


class TestAED:
    def test_closed_form_values(self):
        assert aed_closed_form(0.0, 1.0) == -0.5
        assert aed_closed_form(2.0, 1.0) == 0.75
        s = 0.96
        assert aed_closed_form(threshold(s), s) == pytest.approx(0.0, abs=1e-15)

    @given(st.floats(0.5, 2.0), st.floats(-3, 3))
    @settings(max_examples=60, deadline=None)
    def test_generic_formula(self, s, mu):
        expected = (5 * mu * mu - 8 * s * s) / (16 * s * s)
        assert aed_generic(mu, s).aed == pytest.approx(expected, rel=1e-10, abs=1e-12)

    @pytest.mark.parametrize("mu", [0.0, 0.5, 1.0, 2.0])
    def test_unit_scale_agreement(self, mu):
        rep = aed_cross_check(StressStrengthModel.synthetic(1.0, mu))
        assert rep["agree"] is True and rep["abs_discrepancy"] <= 1e-9

    def test_numeric_path(self):
        assert aed_generic(1.0, 1.0, numeric=True).aed == pytest.approx(aed_generic(1.0, 1.0).aed, abs=1e-6)

    def test_discrepancy_reported(self):
        rep = aed_cross_check(StressStrengthModel.from_nu(3, 1.0))
        assert rep["agree"] is None and rep["rel_discrepancy"] > 1e-3
        assert rep["sign_agree"]
        zero = aed_cross_check(StressStrengthModel.from_nu(3, 0.0))
        assert zero["aed_closed"] < 0 and zero["aed_generic"] < 0

    def test_sign_consistency_grid(self):
        for nu in range(3, 31):
            for row in curve_rows(nu, MU_GRID):
                assert np.sign(row["aed_closed"]) == np.sign(row["aed_generic"]), (nu, row["mu"])

    def test_thin_disagreement_band(self):
        # the two zero crossings differ slightly when sigma* != 1
        s = sigma_star(3)
        closed_root = threshold(s)
        generic_root = math.sqrt(8 / 5) * s
        assert 1.2 < generic_root < closed_root < 1.22
        mid = 0.5 * (closed_root + generic_root)
        assert aed_generic(mid, s).aed > 0 > aed_closed_form(mid, s)
        assert not any(generic_root < abs(m) < closed_root for m in MU_GRID)

    @pytest.mark.parametrize("mu", [0.0, 0.5, 1.0, 2.0, 3.0])
    def test_empirical_deficiency(self, mu):
        s = sigma_star(3)
        emp = empirical_deficiency(mu, s, 10_000)
        gen = aed_generic(mu, s).aed
        assert emp == pytest.approx(gen, rel=0.05)


class TestDecision:
    def test_examples(self):
        d = decide(StressStrengthModel.from_nu(3, 0.0))
        assert d.preferred == MDPDE and d.reliability == 0.5 and d.in_band
        d = decide(StressStrengthModel.from_nu(3, 3.0))
        assert d.preferred == UMVUE and d.reliability > 0.81
        s = sigma_star(3)
        assert decide(StressStrengthModel(3.0, threshold(s), s)).preferred == TIE
        assert decide(StressStrengthModel(3.0, -threshold(s), s)).preferred == TIE

    @given(st.integers(3, 30), st.floats(-4, 4))
    @settings(max_examples=80, deadline=None)
    def test_rule(self, nu, mu):
        d = decide(StressStrengthModel.from_nu(nu, mu))
        if abs(mu) < d.threshold * (1 - 1e-9):
            assert d.preferred == MDPDE
        elif abs(mu) > d.threshold * (1 + 1e-9):
            assert d.preferred == UMVUE

    def test_band_on_grid(self):
        for nu in range(3, 31):
            for row in curve_rows(nu, MU_GRID):
                if row["preferred"] == MDPDE:
                    assert 0.19 - 0.005 < row["reliability"] < 0.81 + 0.005

    def test_band_edge_value(self):
        # reliability at the threshold is Phi(2/sqrt(4+sigma*))
        for nu in (3, 10, 30):
            s = sigma_star(nu)
            d = decide(StressStrengthModel.from_nu(nu, 0.0))
            assert d.band_edge_reliability == pytest.approx(stats.norm.cdf(2 / math.sqrt(4 + s)), rel=1e-14)
            assert 0.81 < d.band_edge_reliability < 0.82

    def test_risks_follow_decision(self):
        s = sigma_star(3)
        assert risk_mdpde(0.0, s, 30) < risk_umvue(0.0, s, 30)
        assert risk_mdpde(3.0, s, 30) > risk_umvue(3.0, s, 30)

    def test_curve_rows(self):
        rows = curve_rows(3, [0.0, 1.0])
        assert list(rows[0]) == list(CURVE_COLUMNS)
        assert decide(StressStrengthModel.from_nu(3, 1.0)).to_dict()["band"] == [0.19, 0.81]
