"""Kullback-Leibler, density power (DPD) and logarithmic DPD divergences.

Finite-support densities are summed directly; if every probability is an
int or Fraction and ``alpha`` is an integer, the DPD is computed exactly.
Continuous densities share the quadrature engine in :mod:`divgen.numerics`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import DomainError, NumericError
from .families import Density, ParametricFamily
from .numerics import DEFAULT_TOL, integrate

__all__ = [
    "DivergenceKind",
    "DivergenceSpec",
    "kl_divergence",
    "dpd",
    "ldpd",
    "dpd_objective",
    "dpd_estimating_residual",
    "ldpd_estimating_residual",
    "ml_score_residual",
]


class DivergenceKind(str, Enum):
    KL = "kl"
    DPD = "dpd"
    LDPD = "ldpd"


def _check_alpha(alpha):
    if alpha is None or not alpha > 0 or alpha == 1:
        raise DomainError(f"alpha must be positive and different from 1, got {alpha!r}")


def _common_points(g: Density, f: Density):
    if g.support.is_finite != f.support.is_finite:
        raise DomainError("cannot compare a finite-support density with a continuous one")
    if g.support.is_finite:
        values = list(g.support.values)
        values += [v for v in f.support.values if v not in set(values)]
        return values
    return None


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def _interval_union(g: Density, f: Density):
    from .numerics import IntervalSupport

    return IntervalSupport(min(g.support.lower, f.support.lower), max(g.support.upper, f.support.upper))


def _integral(fn, g: Density, f: Density, tol):
    support = _interval_union(g, f)
    return integrate(fn, support, tol=tol, center=0.5 * (g.center + f.center), scale=max(g.scale, f.scale))


def kl_divergence(g: Density, f: Density, *, tol: float = DEFAULT_TOL) -> float:
    """``int g log(g/f)``; ``math.inf`` when ``f = 0`` on a set where ``g > 0``."""
    points = _common_points(g, f)
    if points is not None:
        total = 0.0
        for y in points:
            gy, fy = float(g.pdf(y)), float(f.pdf(y))
            if gy == 0:
                continue
            if fy == 0:
                return math.inf
            total += gy * math.log(gy / fy)
        return max(total, 0.0) if total > -1e-15 else total

    def integrand(y):
        gy = g.pdf(y)
        if gy <= 0:
            return 0.0
        fy = f.pdf(y)
        if fy <= 0:
            raise ZeroDivisionError
        return gy * (math.log(gy) - math.log(fy))

    try:
        return _integral(integrand, g, f, tol)
    except ZeroDivisionError:
        return math.inf


def _three_integrals(g: Density, f: Density, alpha, tol):
    """``(int g f^(alpha-1), int g^alpha, int f^alpha)``."""
    points = _common_points(g, f)
    if points is not None:
        gs = [g.pdf(y) for y in points]
        fs = [f.pdf(y) for y in points]
        exact = float(alpha).is_integer() and all(map(_is_exact, gs + fs))
        if exact:
            a = int(alpha)
            cross = sum(gy * fy ** (a - 1) for gy, fy in zip(gs, fs) if gy != 0)
            return cross, sum(gy**a for gy in gs), sum(fy**a for fy in fs)
        gs = np.asarray(gs, dtype=float)
        fs = np.asarray(fs, dtype=float)
        mask = gs > 0
        if alpha < 1 and np.any(mask & (fs == 0)):
            raise NumericError("int g f^(alpha-1) diverges: f vanishes where g is positive")
        cross = float(np.sum(gs[mask] * fs[mask] ** (alpha - 1)))
        return cross, float(np.sum(gs**alpha)), float(np.sum(fs**alpha))

    def cross_fn(y):
        gy = g.pdf(y)
        if gy <= 0:
            return 0.0
        fy = f.pdf(y)
        if fy <= 0 and alpha < 1:
            raise NumericError("int g f^(alpha-1) diverges: f vanishes where g is positive", y=float(y))
        return gy * fy ** (alpha - 1)

    return (
        _integral(cross_fn, g, f, tol),
        _integral(lambda y: g.pdf(y) ** alpha, g, f, tol),
        _integral(lambda y: f.pdf(y) ** alpha, g, f, tol),
    )


def dpd(g: Density, f: Density, alpha: float, *, tol: float = DEFAULT_TOL):
    """Density power divergence ``B_alpha(g, f)``.

    ``alpha/(1-alpha) int g f^(alpha-1) - 1/(1-alpha) int g^alpha + int f^alpha``
    """
    _check_alpha(alpha)
    cross, g_pow, f_pow = _three_integrals(g, f, alpha, tol)
    if all(map(_is_exact, (cross, g_pow, f_pow))):
        a = int(alpha)
        return Fraction(a, 1 - a) * cross - Fraction(1, 1 - a) * g_pow + f_pow
    return alpha / (1 - alpha) * cross - g_pow / (1 - alpha) + f_pow


def ldpd(g: Density, f: Density, alpha: float, *, tol: float = DEFAULT_TOL) -> float:
    """Logarithmic density power divergence ``I_alpha(g, f)``."""
    _check_alpha(alpha)
    cross, g_pow, f_pow = (float(x) for x in _three_integrals(g, f, alpha, tol))
    if min(cross, g_pow, f_pow) <= 0:
        raise DomainError("LDPD needs strictly positive integrals")
    return alpha / (1 - alpha) * math.log(cross) - math.log(g_pow) / (1 - alpha) + math.log(f_pow)


@dataclass(frozen=True)
class DivergenceSpec:
    kind: DivergenceKind
    alpha: float | None = None
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "kind", DivergenceKind(self.kind))
        if self.kind is not DivergenceKind.KL:
            _check_alpha(self.alpha)

    def __call__(self, g: Density, f: Density):
        if self.kind is DivergenceKind.KL:
            return kl_divergence(g, f, tol=self.tol)
        if self.kind is DivergenceKind.DPD:
            return dpd(g, f, self.alpha, tol=self.tol)
        return ldpd(g, f, self.alpha, tol=self.tol)


# ---------------------------------------------------------------------------
# estimating equations


def _as_sample(sample):
    return np.asarray(sample, dtype=float).ravel()


def _pdf_power_times_score(fam, lam, alpha, y):
    return fam.pdf(lam, y) ** alpha * fam.score(lam, y)


def _model_terms(fam: ParametricFamily, lam, alpha):
    """``(int f^alpha u, int f^alpha)`` for the model at ``lam``."""
    if fam.support.is_finite:
        ys = fam.support.values
        fu = sum(float(_pdf_power_times_score(fam, lam, alpha, y)) for y in ys)
        fp = sum(float(fam.pdf(lam, y)) ** alpha for y in ys)
        return fu, fp
    fu = fam.integrate(lambda y: _pdf_power_times_score(fam, lam, alpha, y), lam)
    fp = fam.power_integral(lam, alpha)
    return fu, fp


def dpd_objective(sample, fam: ParametricFamily, lam, alpha: float) -> float:
    """``lam``-dependent part of ``B_alpha(g_n, f_lam)`` for the empirical ``g_n``."""
    _check_alpha(alpha)
    y = _as_sample(sample)
    cross = float(np.mean(np.asarray(fam.pdf(lam, y), dtype=float) ** (alpha - 1)))
    return alpha / (1 - alpha) * cross + fam.power_integral(lam, alpha)


def dpd_estimating_residual(sample, fam: ParametricFamily, lam, alpha: float) -> float:
    """``(1/n) sum f^(alpha-1)(y_j) u(y_j) - int f^alpha u``; zero at the MDPDE."""
    _check_alpha(alpha)
    fam.check_param(lam)
    y = _as_sample(sample) if not fam.support.is_finite else list(sample)
    weights = np.asarray([fam.pdf(lam, v) for v in y], dtype=float) ** (alpha - 1)
    scores = np.asarray([fam.score(lam, v) for v in y], dtype=float)
    empirical = float(np.mean(weights * scores))
    model, _ = _model_terms(fam, lam, alpha)
    return empirical - model


def ldpd_estimating_residual(sample, fam: ParametricFamily, lam, alpha: float) -> float:
    """Ratio-form LDPD equation: empirical weighted score mean minus model counterpart."""
    _check_alpha(alpha)
    fam.check_param(lam)
    y = _as_sample(sample) if not fam.support.is_finite else list(sample)
    weights = np.asarray([fam.pdf(lam, v) for v in y], dtype=float) ** (alpha - 1)
    scores = np.asarray([fam.score(lam, v) for v in y], dtype=float)
    fu, fp = _model_terms(fam, lam, alpha)
    return float(np.sum(weights * scores) / np.sum(weights)) - fu / fp


def ml_score_residual(sample, fam: ParametricFamily, lam) -> float:
    """``(1/n) sum u(y_j, lam)``, the likelihood equation."""
    y = _as_sample(sample) if not fam.support.is_finite else list(sample)
    return float(np.mean([fam.score(lam, v) for v in y]))
