"""Central moments of the sufficient statistic, AED of the MDPDE vs the UMVUE,
and empirical fits of risk expansions.

Derivatives come from analytic callbacks when given, otherwise from
Richardson-extrapolated central differences.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError, UsageError
from .numerics import richardson_derivative

__all__ = [
    "SmoothFunction",
    "NaturalParamCurve",
    "curve_from_balpha",
    "CentralMoments",
    "central_moments",
    "condition_b_check",
    "AEDReport",
    "aed_balpha",
    "RiskExpansion",
    "FitWarning",
    "risk_expansion_fit",
]

MDPDE, UMVUE, TIE = "MDPDE", "UMVUE", "TIE"


@dataclass(frozen=True)
class SmoothFunction:
    """Scalar function with optional analytic derivatives of order 1 to 3."""

    f: Callable[[float], float]
    d1: Callable[[float], float] | None = None
    d2: Callable[[float], float] | None = None
    d3: Callable[[float], float] | None = None
    name: str = ""

    def __call__(self, x):
        return self.f(x)

    def derivative(self, x: float, order: int = 1) -> float:
        if order == 0:
            return float(self.f(x))
        analytic = (self.d1, self.d2, self.d3)[order - 1]
        if analytic is not None:
            return float(analytic(x))
        return richardson_derivative(self.f, x, order)

    def derivatives(self, x: float) -> tuple[float, float, float]:
        return tuple(self.derivative(x, k) for k in (1, 2, 3))


class NaturalParamCurve(SmoothFunction):
    """``w*(lam)``, the natural parameter of the deformed density of ``T``.

    Regularity requires ``w*' > 0`` wherever it is used.
    """

    def check_regular(self, lam: float) -> float:
        d1 = self.derivative(lam, 1)
        if not d1 > 0:
            raise PreconditionError(f"regularity violated: dw*/dlam = {d1:.6g} <= 0 at lam = {lam}")
        return d1


def curve_from_balpha(fam, component: int = 0) -> NaturalParamCurve:
    """``w* = alpha/(alpha-1) * w_i`` for a one-parameter B^(alpha) family."""
    a = fam.alpha
    k = a / (a - 1.0)

    def w_star(lam):
        return k * float(np.asarray(fam.w(lam), dtype=float)[component])

    d1 = None
    if fam.dw is not None:
        d1 = lambda lam: k * float(np.asarray(fam.dw(lam), dtype=float)[component])  # noqa: E731
    linear = getattr(fam, "location", False) and fam.dw is not None
    zero = (lambda lam: 0.0) if linear else None
    return NaturalParamCurve(w_star, d1, zero, zero, name=f"w*({fam.name})")


@dataclass(frozen=True)
class CentralMoments:
    lam: float
    n: int
    u0: float
    u1: float
    u2: float
    u3: float
    u4: float

    def as_tuple(self):
        return (self.u0, self.u1, self.u2, self.u3, self.u4)


def central_moments(curve: NaturalParamCurve, lam: float, n: int) -> CentralMoments:
    """Closed forms for the first central moments of ``T`` under the deformed law."""
    w1 = curve.check_regular(lam)
    w2 = curve.derivative(lam, 2)
    w3 = curve.derivative(lam, 3)
    nw = n * w1
    u2 = 1.0 / nw
    u3 = -w2 / (n * n * w1**3)
    u4 = 3.0 / nw**2 + (3.0 * (w2 / w1) ** 2 - w3 / w1) / nw**3
    return CentralMoments(lam, n, 1.0, 0.0, u2, u3, u4)


def condition_b_check(log_N: Callable[[float], float], curve: NaturalParamCurve, grid, n: int,
                      tol: float = 1e-6) -> tuple[bool, float]:
    """Check ``d/dlam log N(lam) + n lam dw*/dlam = 0`` on a grid.

    Returns ``(ok, max |lhs|)``.
    """
    worst = 0.0
    for lam in grid:
        lhs = richardson_derivative(log_N, float(lam)) + n * lam * curve.derivative(float(lam), 1)
        worst = max(worst, abs(lhs))
    return worst <= tol * max(1.0, n), worst


@dataclass
class AEDReport:
    aed: float
    a: float
    b: float
    d: float
    lam: float
    preferred: str

    def to_dict(self):
        return {"aed": self.aed, "a": self.a, "b": self.b, "d": self.d, "lambda": self.lam, "preferred": self.preferred}


def preferred_from_aed(aed: float) -> str:
    if aed < 0:
        return MDPDE
    if aed > 0:
        return UMVUE
    return TIE


def aed_balpha(tau: SmoothFunction, curve: NaturalParamCurve, lam: float) -> AEDReport:
    """AED of the MDPDE-based ``tau(T)`` relative to the UMVUE of ``tau``.

    The risks expand as ``a/n + b/n^2`` (MDPDE) and ``a/n + d/n^2`` (UMVUE),
    so the deficiency is ``(b - d)/a``. A negative value favors the MDPDE.
    """
    w1 = curve.check_regular(lam)
    w2 = curve.derivative(lam, 2)
    t1, t2, t3 = tau.derivatives(lam)
    if t1 == 0:
        raise DomainError(f"tau' = 0 at lam = {lam}; the deficiency is undefined")
    aed = (t3 / t1 + 0.25 * (t2 / t1) ** 2) / w1 - (w2 / w1**2) * (t2 / t1)
    a = t1 * t1 / w1
    d = 0.5 * t2 * t2 / w1**2
    b = (t1 * t3 - t1 * t2 * w2 / w1 + 0.75 * t2 * t2) / w1**2
    return AEDReport(aed, a, b, d, lam, preferred_from_aed(aed))


# ---------------------------------------------------------------------------


class FitWarning(UserWarning):
    """The risk-expansion design is poorly conditioned."""


@dataclass
class RiskExpansion:
    a: float
    b: float
    r: float
    s: float
    residual: float
    condition: float
    n_values: list = field(default_factory=list)
    warning: str | None = None

    def to_dict(self):
        return {
            "a": self.a,
            "b": self.b,
            "r": self.r,
            "s": self.s,
            "residual": self.residual,
            "condition": self.condition,
            "n_values": self.n_values,
            "warning": self.warning,
        }


def risk_expansion_fit(risks: Sequence[tuple[float, float]], *, min_n: int = 20,
                       max_condition: float = 1e6) -> RiskExpansion:
    """Least-squares fit of ``n R(n) = a + b/n``.

    ``r`` is the slope of ``-log R`` against ``log n``; ``s`` is the slope of
    ``-log |n R - a|`` against ``log n``, both expected near 1. A design whose
    condition number exceeds ``max_condition`` triggers ``FitWarning``.
    """
    data = sorted((float(n), float(r)) for n, r in risks)
    ns = np.asarray([n for n, _ in data])
    rs = np.asarray([r for _, r in data])
    if len(set(ns)) < 4:
        raise UsageError("need at least four distinct sample sizes")
    if ns.min() < min_n:
        raise UsageError(f"sample sizes must be at least {min_n}")
    if np.any(rs <= 0):
        raise DomainError("risks must be positive")
    design = np.column_stack([np.ones_like(ns), 1.0 / ns])
    # scale columns before judging conditioning
    scaled = design / np.linalg.norm(design, axis=0)
    cond = float(np.linalg.cond(scaled))
    target = ns * rs
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    a, b = map(float, coef)
    fitted = design @ coef
    residual = float(np.max(np.abs(fitted - target)) / max(abs(a), 1e-300))
    r = -float(np.polyfit(np.log(ns), np.log(rs), 1)[0])
    dev = np.abs(target - a)
    s = -float(np.polyfit(np.log(ns), np.log(dev), 1)[0]) if np.all(dev > 0) else math.nan
    warning = None
    if cond > max_condition:
        warning = f"ill-conditioned design (condition {cond:.3g}); widen the range of n"
        warnings.warn(warning, FitWarning, stacklevel=2)
    return RiskExpansion(a, b, r, s, residual, cond, [int(n) for n in ns], warning)
