"""Stress-strength reliability under the deformed Gaussian induced by Student(nu).

Stress ``X`` and strength ``Y`` share the Student(nu) law with unit scale;
``Y`` has unknown location ``mu``. Under the deformed measure
``Ybar ~ N(mu, sigma*^2/n)`` and the reliability is ``Phi(mu/(sqrt(2) sigma*))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aed import MDPDE, TIE, UMVUE, NaturalParamCurve, SmoothFunction, aed_balpha, preferred_from_aed
from .deformed import GaussianDeformed
from .errors import DomainError, NumericError
from .families import sigma_star
from .numerics import IntervalSupport, integrate, norm_cdf, norm_pdf

__all__ = [
    "StressStrengthModel",
    "sigma_star",
    "reliability",
    "estimators",
    "aed_closed_form",
    "aed_generic",
    "aed_cross_check",
    "ReliabilityDecision",
    "decide",
    "threshold",
    "risk_mdpde",
    "risk_umvue",
    "empirical_deficiency",
    "curve_rows",
    "CURVE_COLUMNS",
]

BAND = (0.19, 0.81)
CURVE_COLUMNS = ("mu", "reliability", "aed_closed", "aed_generic", "preferred")


@dataclass(frozen=True)
class StressStrengthModel:
    """``nu`` and ``mu``; ``sigma_star`` may be given directly for synthetic checks."""

    nu: float | None
    mu: float
    sigma_star: float

    @classmethod
    def from_nu(cls, nu: float, mu: float) -> "StressStrengthModel":
        return cls(float(nu), float(mu), sigma_star(nu))

    @classmethod
    def synthetic(cls, sigma: float, mu: float) -> "StressStrengthModel":
        if not sigma > 0:
            raise DomainError("sigma* must be positive")
        return cls(None, float(mu), float(sigma))

    @property
    def alpha(self) -> float | None:
        return None if self.nu is None else 1.0 - 2.0 / (self.nu + 1.0)

    def deformed(self, n: int) -> GaussianDeformed:
        return GaussianDeformed(self.mu, self.sigma_star, n)


def reliability(mu, sigma: float):
    """``Phi(mu / (sqrt(2) sigma*))``."""
    if not sigma > 0:
        raise DomainError("sigma* must be positive")
    out = norm_cdf(np.asarray(mu, dtype=float) / (math.sqrt(2.0) * sigma))
    return float(out) if np.ndim(out) == 0 else out


def _umvue_factor(n: int) -> float:
    return math.sqrt(n / (2.0 * n - 1.0))


def estimators(model: StressStrengthModel, ybar, n: int) -> tuple:
    """``(MDPDE, UMVUE)`` of the reliability from the sample mean."""
    if n < 1:
        raise DomainError("n must be at least 1")
    s = model.sigma_star
    y = np.asarray(ybar, dtype=float)
    mdpde = norm_cdf(y / (math.sqrt(2.0) * s))
    umvue = norm_cdf(_umvue_factor(n) * y / s)
    if np.ndim(mdpde) == 0:
        return float(mdpde), float(umvue)
    return mdpde, umvue


def aed_closed_form(mu: float, sigma: float) -> float:
    """``((4 + sigma*) mu^2 - 8 sigma*^2) / (16 sigma*)``."""
    if not sigma > 0:
        raise DomainError("sigma* must be positive")
    return ((4.0 + sigma) * mu * mu - 8.0 * sigma * sigma) / (16.0 * sigma)


def _tau(sigma: float) -> SmoothFunction:
    c = math.sqrt(2.0) * sigma

    def phi(mu):
        return float(norm_pdf(mu / c))

    return SmoothFunction(
        lambda mu: float(norm_cdf(mu / c)),
        lambda mu: phi(mu) / c,
        lambda mu: -(mu / c) * phi(mu) / c**2,
        lambda mu: ((mu / c) ** 2 - 1.0) * phi(mu) / c**3,
        name="reliability",
    )


def _w_star(sigma: float) -> NaturalParamCurve:
    inv = 1.0 / sigma**2
    return NaturalParamCurve(lambda mu: mu * inv, lambda mu: inv, lambda mu: 0.0, lambda mu: 0.0, name="mu/sigma*^2")


def aed_generic(mu: float, sigma: float, *, numeric: bool = False):
    """AED from the general formula with ``tau = Phi(mu/(sqrt2 sigma*))`` and ``w* = mu/sigma*^2``.

    ``numeric=True`` drops the analytic derivatives and uses the finite-difference engine.
    """
    tau, curve = _tau(sigma), _w_star(sigma)
    if numeric:
        tau = SmoothFunction(tau.f, name=tau.name)
        curve = NaturalParamCurve(curve.f, name=curve.name)
    return aed_balpha(tau, curve, mu)


def aed_cross_check(model: StressStrengthModel, tol: float = 1e-9) -> dict:
    """Compare the closed form with the generic-formula value.

    They coincide only at ``sigma* = 1``; elsewhere the relative discrepancy
    is reported without deciding which is right.
    """
    closed = aed_closed_form(model.mu, model.sigma_star)
    generic = aed_generic(model.mu, model.sigma_star).aed
    diff = abs(closed - generic)
    rel = diff / max(abs(generic), abs(closed), 1e-300)
    unit = math.isclose(model.sigma_star, 1.0, rel_tol=0, abs_tol=1e-15)
    return {
        "mu": model.mu,
        "sigma_star": model.sigma_star,
        "aed_closed": closed,
        "aed_generic": generic,
        "abs_discrepancy": diff,
        "rel_discrepancy": rel,
        "sign_agree": (closed > 0) == (generic > 0) and (closed < 0) == (generic < 0),
        "unit_scale": unit,
        "agree": diff <= tol if unit else None,
    }


def threshold(sigma: float) -> float:
    """``|mu|`` below which the MDPDE is preferred: ``sqrt(8/(4+sigma*)) sigma*``."""
    return math.sqrt(8.0 / (4.0 + sigma)) * sigma


@dataclass
class ReliabilityDecision:
    mu: float
    nu: float | None
    sigma_star: float
    reliability: float
    aed_closed: float
    aed_generic: float
    threshold: float
    preferred: str
    preferred_generic: str
    in_band: bool
    band_edge_reliability: float

    def to_dict(self):
        return {
            "mu": self.mu,
            "nu": self.nu,
            "sigma_star": self.sigma_star,
            "reliability": self.reliability,
            "aed_closed": self.aed_closed,
            "aed_generic": self.aed_generic,
            "threshold": self.threshold,
            "preferred": self.preferred,
            "preferred_generic": self.preferred_generic,
            "reliability_in_band": self.in_band,
            "band": list(BAND),
            "band_edge_reliability": self.band_edge_reliability,
        }


def decide(model: StressStrengthModel) -> ReliabilityDecision:
    s = model.sigma_star
    thr = threshold(s)
    m = abs(model.mu)
    if math.isclose(m, thr, rel_tol=1e-12, abs_tol=0.0):
        preferred = TIE
    else:
        preferred = MDPDE if m < thr else UMVUE
    rel = reliability(model.mu, s)
    generic = aed_generic(model.mu, s).aed
    return ReliabilityDecision(
        mu=model.mu,
        nu=model.nu,
        sigma_star=s,
        reliability=rel,
        aed_closed=aed_closed_form(model.mu, s),
        aed_generic=generic,
        threshold=thr,
        preferred=preferred,
        preferred_generic=preferred_from_aed(generic),
        in_band=BAND[0] < rel < BAND[1],
        band_edge_reliability=reliability(thr, s),
    )


# ---------------------------------------------------------------------------
# deficiency from exact risk curves


def _risk(fn, mu, sigma, n, tol):
    sd = sigma / math.sqrt(n)
    target = reliability(mu, sigma)

    def integrand(z):
        return (fn(mu + sd * z) - target) ** 2 * float(norm_pdf(z))

    return integrate(integrand, IntervalSupport(-12.0, 12.0), tol=tol)


def risk_mdpde(mu: float, sigma: float, n: int, tol: float = 1e-13) -> float:
    c = math.sqrt(2.0) * sigma
    return _risk(lambda t: float(norm_cdf(t / c)), mu, sigma, n, tol)


def risk_umvue(mu: float, sigma: float, n: int, tol: float = 1e-13) -> float:
    k = _umvue_factor(n) / sigma
    return _risk(lambda t: float(norm_cdf(k * t)), mu, sigma, n, tol)


def empirical_deficiency(mu: float, sigma: float, n: int, tol: float = 1e-13, max_steps: int = 200) -> float:
    """``k_n - n`` with ``R_MDPDE(k_n) = R_UMVUE(n)``.

    Risks come from quadrature over ``Ybar``; ``k_n`` is found by linear
    interpolation between consecutive integers.
    """
    target = risk_umvue(mu, sigma, n, tol)
    k = n
    rk = risk_mdpde(mu, sigma, k, tol)
    step = 1 if rk > target else -1
    for _ in range(max_steps):
        k2 = k + step
        if k2 < 1:
            break
        r2 = risk_mdpde(mu, sigma, k2, tol)
        if (rk - target) * (r2 - target) <= 0:
            # linear interpolation in k
            frac = (rk - target) / (rk - r2)
            return k + step * frac - n
        k, rk = k2, r2
    raise NumericError("could not bracket the matching sample size", mu=mu, n=n)


def curve_rows(nu: float | None, mus, sigma: float | None = None) -> list[dict]:
    """Rows of ``CURVE_COLUMNS`` over a grid of ``mu`` values."""
    s = sigma_star(nu) if sigma is None else sigma
    rows = []
    for mu in mus:
        dec = decide(StressStrengthModel(nu, float(mu), s))
        rows.append(
            {
                "mu": float(mu),
                "reliability": dec.reliability,
                "aed_closed": dec.aed_closed,
                "aed_generic": dec.aed_generic,
                "preferred": dec.preferred,
            }
        )
    return rows
