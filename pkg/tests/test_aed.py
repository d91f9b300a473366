import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from divgen.aed import (
    MDPDE,
    TIE,
    UMVUE,
    FitWarning,
    NaturalParamCurve,
    SmoothFunction,
    aed_balpha,
    central_moments,
    condition_b_check,
    curve_from_balpha,
    preferred_from_aed,
    risk_expansion_fit,
)
from divgen.errors import DomainError, PreconditionError, UsageError
from divgen.families import make_student_balpha, sigma_star
from divgen.numerics import richardson_derivative

linear = NaturalParamCurve(lambda lam: lam, name="identity")
poisson_curve = NaturalParamCurve(math.log, name="log")


class TestRichardson:
    @pytest.mark.parametrize("x", [-1.3, 0.0, 0.4, 2.0])
    @pytest.mark.parametrize(
        "f,derivs",
        [
            (math.sin, (math.cos, lambda x: -math.sin(x), lambda x: -math.cos(x))),
            (math.exp, (math.exp, math.exp, math.exp)),
            (lambda x: x**5, (lambda x: 5 * x**4, lambda x: 20 * x**3, lambda x: 60 * x**2)),
        ],
    )
    def test_orders(self, f, derivs, x):
        for order, d in enumerate(derivs, start=1):
            assert richardson_derivative(f, x, order) == pytest.approx(d(x), abs=1e-7 * max(1, abs(d(x))))

    def test_near_domain_edge(self):
        # large trial steps leave the domain of sqrt and are skipped
        x = 0.05
        assert richardson_derivative(math.sqrt, x, 3) == pytest.approx(0.375 * x**-2.5, rel=1e-6)

    def test_all_steps_fail(self):
        from divgen.errors import NumericError

        with pytest.raises(NumericError):
            richardson_derivative(lambda t: math.log(-1.0), 0.5, 1)

    def test_explicit_step(self):
        assert richardson_derivative(math.exp, 0.0, 1, h0=0.05) == pytest.approx(1.0, abs=1e-12)

    def test_smooth_function_prefers_analytic(self):
        fn = SmoothFunction(math.sin, d1=lambda x: 42.0)
        assert fn.derivative(0.3, 1) == 42.0
        assert fn.derivative(0.3, 2) == pytest.approx(-math.sin(0.3), abs=1e-7)
        assert fn.derivative(0.3, 0) == pytest.approx(math.sin(0.3))


class TestCentralMoments:
    @pytest.mark.parametrize("sigma,n", [(1.0, 1), (0.95, 10), (2.0, 7)])
    def test_gaussian(self, sigma, n):
        curve = NaturalParamCurve(lambda lam: lam / sigma**2)
        m = central_moments(curve, 0.4, n)
        var = sigma**2 / n
        assert m.as_tuple() == pytest.approx((1.0, 0.0, var, 0.0, 3 * var**2), abs=1e-9 * max(1, var))

    @pytest.mark.parametrize("lam,n", [(0.5, 1), (2.0, 3), (7.5, 12)])
    def test_poisson_mean(self, lam, n):
        # sum of n Poisson(lam) is Poisson(n lam); central moments of the mean follow
        dist = stats.poisson(n * lam)
        mu2 = dist.moment(2) - dist.mean() ** 2
        mu3 = dist.stats(moments="s") * mu2**1.5
        mu4 = (dist.stats(moments="k") + 3) * mu2**2
        m = central_moments(poisson_curve, lam, n)
        assert m.u2 == pytest.approx(mu2 / n**2, rel=1e-7)
        assert m.u3 == pytest.approx(float(mu3) / n**3, rel=1e-6)
        assert m.u4 == pytest.approx(float(mu4) / n**4, rel=1e-6)

    @given(st.floats(0.2, 3.0), st.integers(1, 50))
    @settings(max_examples=40, deadline=None)
    def test_recursion(self, lam, n):
        """u_{k+1} = (u_k' + k u_{k-1}) / (n w*')."""
        curve = NaturalParamCurve(lambda t: t + t**3 / 3 + math.sin(t) / 5)
        mom = lambda t: central_moments(curve, t, n)  # noqa: E731
        m = mom(lam)
        scale = n * curve.derivative(lam, 1)
        for k, (lower, cur, nxt) in enumerate(
            [("u0", "u1", "u2"), ("u1", "u2", "u3"), ("u2", "u3", "u4")], start=1
        ):
            dcur = richardson_derivative(lambda t, c=cur: getattr(mom(t), c), lam)
            rhs = (dcur + k * getattr(m, lower)) / scale
            assert getattr(m, nxt) == pytest.approx(rhs, abs=1e-5 * max(1e-3, abs(rhs)))

    def test_regularity(self):
        curve = NaturalParamCurve(lambda lam: -lam)
        with pytest.raises(PreconditionError):
            central_moments(curve, 0.2, 3)

    def test_condition_b(self):
        sigma, n = 0.9, 5
        curve = NaturalParamCurve(lambda lam: lam / sigma**2)
        ok, worst = condition_b_check(lambda lam: -n * lam**2 / (2 * sigma**2), curve, np.linspace(-2, 2, 9), n)
        assert ok and worst < 1e-8
        bad, _ = condition_b_check(lambda lam: -n * lam**2 / sigma**2, curve, np.linspace(-2, 2, 9), n)
        assert not bad


class TestCurves:
    @pytest.mark.parametrize("nu", [3, 4, 5, 10, 30])
    def test_student_curve_slope(self, nu):
        curve = curve_from_balpha(make_student_balpha(nu), component=1)
        assert curve.derivative(0.7, 1) == pytest.approx(1 / sigma_star(nu) ** 2, rel=1e-12)
        assert curve.derivative(0.7, 2) == 0.0

    def test_bernoulli_curve(self, balpha):
        curve = curve_from_balpha(balpha)
        assert curve(0.75) == pytest.approx(2 * (2 * 0.75 - 1))
        assert curve.derivative(0.3, 1) == pytest.approx(4.0)


class TestAED:
    @pytest.mark.parametrize("lam", [0.5, 1.0, 3.0])
    def test_square_of_gaussian_mean(self, lam):
        """tau = lam^2, T ~ N(lam, 1/n): MDPDE T^2 has risk 4lam^2/n + 3/n^2, UMVUE T^2 - 1/n has 4lam^2/n + 2/n^2."""
        tau = SmoothFunction(lambda t: t * t, lambda t: 2 * t, lambda t: 2.0, lambda t: 0.0)
        rep = aed_balpha(tau, linear, lam)
        assert rep.a == pytest.approx(4 * lam**2)
        assert rep.b == pytest.approx(3.0)
        assert rep.d == pytest.approx(2.0)
        assert rep.aed == pytest.approx(1 / (4 * lam**2))
        assert rep.preferred == UMVUE

    def test_quarter(self):
        tau = SmoothFunction(lambda t: t * t)
        assert aed_balpha(tau, NaturalParamCurve(lambda t: t), 1.0).aed == pytest.approx(0.25, abs=1e-7)

    @given(st.floats(-2, 2), st.floats(0.3, 3))
    @settings(max_examples=50, deadline=None)
    def test_general_identity(self, lam, c):
        tau = SmoothFunction(lambda t: math.exp(c * t) + t)
        curve = NaturalParamCurve(lambda t: t + 0.1 * t**3)
        rep = aed_balpha(tau, curve, lam)
        assert rep.aed == pytest.approx((rep.b - rep.d) / rep.a, rel=1e-9, abs=1e-12)

    def test_numeric_matches_analytic(self):
        c = math.sqrt(2) * 0.95
        tau = SmoothFunction(lambda m: stats.norm.cdf(m / c))
        curve = NaturalParamCurve(lambda m: m / 0.95**2)
        from divgen.stress import aed_generic

        assert aed_balpha(tau, curve, 0.8).aed == pytest.approx(aed_generic(0.8, 0.95).aed, abs=1e-6)

    def test_flat_tau(self):
        with pytest.raises(DomainError):
            aed_balpha(SmoothFunction(lambda t: 1.0, lambda t: 0.0, lambda t: 0.0, lambda t: 0.0), linear, 0.0)

    def test_preferred(self):
        assert preferred_from_aed(-1e-3) == MDPDE
        assert preferred_from_aed(2.0) == UMVUE
        assert preferred_from_aed(0.0) == TIE


class TestFit:
    def test_exact_recovery(self):
        a, b = 0.37, -1.4
        ns = [200, 400, 800, 1600, 3200, 6400]
        fit = risk_expansion_fit([(n, a / n + b / n**2) for n in ns])
        assert fit.a == pytest.approx(a, rel=1e-10)
        assert fit.b == pytest.approx(b, rel=1e-8)
        assert fit.s == pytest.approx(1.0, rel=1e-8)
        assert fit.r == pytest.approx(1.0, abs=0.01)
        assert fit.residual < 1e-10

    def test_stress_risks(self):
        from divgen.stress import aed_generic, risk_mdpde

        s, mu = sigma_star(3), 1.0
        ns = [500, 1000, 2000, 4000, 8000, 16000]
        fit = risk_expansion_fit([(n, risk_mdpde(mu, s, n)) for n in ns])
        ref = aed_generic(mu, s)
        assert fit.a == pytest.approx(ref.a, rel=1e-5)
        assert fit.b == pytest.approx(ref.b, rel=0.05)
        assert fit.r == pytest.approx(1.0, abs=0.01)
        assert fit.s == pytest.approx(1.0, abs=0.02)

    def test_errors(self):
        with pytest.raises(UsageError):
            risk_expansion_fit([(20, 1.0), (40, 0.5), (80, 0.25)])
        with pytest.raises(UsageError):
            risk_expansion_fit([(5, 1.0), (40, 0.5), (80, 0.25), (100, 0.2)])
        with pytest.raises(DomainError):
            risk_expansion_fit([(20, 1.0), (40, -0.5), (80, 0.25), (100, 0.2)])

    def test_ill_conditioned_warns(self):
        data = [(n, 1 / n + 1 / n**2) for n in (1000, 1001, 1002, 1003)]
        with pytest.warns(FitWarning):
            fit = risk_expansion_fit(data, max_condition=1e3)
        assert fit.warning is not None
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            risk_expansion_fit([(n, 1 / n) for n in (20, 200, 2000, 20000)])
