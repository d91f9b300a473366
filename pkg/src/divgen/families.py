"""Parametric families: generic, exponential, B^(alpha) and M^(alpha) forms.

A family is a map ``lam -> density`` with a declared support and an open box
of admissible parameters. Evaluating outside the box raises ``DomainError``.
Finite-support families may carry an exact pmf as a sympy expression in the
module-level symbol ``LAM``; the deformed-distribution and completeness code
relies on it for exact arithmetic.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy as sp
from scipy import optimize
from scipy.special import gammaln

from .errors import DomainError, NumericError
from .numerics import (
    DEFAULT_TOL,
    FiniteSupport,
    IntervalSupport,
    Support,
    fd_score,
    integrate,
)

__all__ = [
    "LAM",
    "Density",
    "FiniteDensity",
    "ContinuousDensity",
    "ParametricFamily",
    "ExponentialFamily",
    "BAlphaFamily",
    "MAlphaFamily",
    "NormalizationReport",
    "make_student_balpha",
    "make_bernoulli_malpha",
    "make_bernoulli_balpha",
    "make_bernoulli_exponential",
    "make_finite_family",
    "make_normal_location",
    "normalization_check",
    "student_pdf",
    "student_log_constant",
    "student_N",
    "sigma_star",
]

LAM = sp.Symbol("lam", real=True)


# ---------------------------------------------------------------------------
# fully specified densities


class Density:
    """A single probability density (or pmf) on a support."""

    support: Support

    def pdf(self, y):
        raise NotImplementedError

    def integrate(self, fn, tol=DEFAULT_TOL):
        return integrate(fn, self.support, tol=tol, center=self.center, scale=self.scale)

    center = 0.0
    scale = 1.0


class FiniteDensity(Density):
    """pmf on finitely many points; ``probs`` may be floats or Fractions."""

    def __init__(self, values: Sequence, probs: Sequence):
        if len(values) != len(probs):
            raise ValueError("values and probs must have equal length")
        self.support = FiniteSupport(tuple(values))
        self.probs = tuple(probs)
        self._index = {v: i for i, v in enumerate(values)}

    @property
    def values(self):
        return self.support.values

    def pdf(self, y):
        i = self._index.get(y)
        return 0 if i is None else self.probs[i]

    def prob_vector(self, values):
        return [self.pdf(v) for v in values]

    def __repr__(self):
        return f"FiniteDensity({dict(zip(self.values, self.probs))})"


class ContinuousDensity(Density):
    def __init__(self, pdf: Callable, support: IntervalSupport, center=0.0, scale=1.0):
        self._pdf = pdf
        self.support = support
        self.center = center
        self.scale = scale

    def pdf(self, y):
        return self._pdf(y)


# ---------------------------------------------------------------------------
# families


class ParametricFamily:
    """Family ``{f_lam : lam in Lambda}`` with ``Lambda`` an open box.

    Parameters
    ----------
    name : str
    support : FiniteSupport or IntervalSupport
    bounds : sequence of (lower, upper) pairs, one per parameter coordinate
    pdf : callable ``(lam, y) -> density``; vectorised in ``y`` for interval supports
    score : optional analytic ``(lam, y) -> d/dlam log f_lam(y)``
    exact_pmf : optional ``y -> sympy expression in LAM`` (finite supports)
    center, scale : optional ``lam -> float`` hints for the quadrature window
    """

    alpha: float | None = None

    def __init__(
        self,
        name: str,
        support: Support,
        bounds,
        pdf: Callable,
        *,
        score: Callable | None = None,
        exact_pmf: Callable | None = None,
        center: Callable | None = None,
        scale: float = 1.0,
        tol: float = DEFAULT_TOL,
    ):
        self.name = name
        self.support = support
        bounds = tuple(bounds)
        if len(bounds) == 2 and not isinstance(bounds[0], (tuple, list)):
            bounds = (tuple(bounds),)
        self.bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        self._pdf = pdf
        self._score = score
        self._exact_pmf = exact_pmf
        self._center = center
        self.scale = scale
        self.tol = tol
        self._memo: dict = {}

    # parameter handling -------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.bounds)

    def check_param(self, lam):
        """Reject parameters outside the open box (boundary included)."""
        coords = np.atleast_1d(np.asarray(lam, dtype=float))
        if coords.shape != (self.dim,):
            raise DomainError(f"{self.name}: expected {self.dim} parameter(s), got {lam!r}")
        for x, (lo, hi) in zip(coords, self.bounds):
            if not (lo < x < hi):
                raise DomainError(f"{self.name}: parameter {lam!r} outside open domain ({lo}, {hi})")
        return lam

    def grid(self, points: int = 9, lo_frac: float = 0.1, hi_frac: float = 0.9, span: float = 2.0):
        """Evenly spaced 1-D grid inside the parameter interval.

        Bounded intervals use ``lo_frac..hi_frac`` of their width; unbounded
        ones use ``[-span, span]`` clipped into the domain.
        """
        (lo, hi), = self.bounds
        a = lo + lo_frac * (hi - lo) if math.isfinite(lo) and math.isfinite(hi) else max(lo, -span)
        b = lo + hi_frac * (hi - lo) if math.isfinite(lo) and math.isfinite(hi) else min(hi, span)
        if not math.isfinite(lo) or not math.isfinite(hi):
            if a <= lo:
                a = lo + 0.1 * (b - lo)
            if b >= hi:
                b = hi - 0.1 * (hi - a)
        return np.linspace(a, b, points)

    # evaluation ---------------------------------------------------------
    def pdf(self, lam, y):
        self.check_param(lam)
        if self.support.is_finite:
            if np.ndim(y) == 0:
                return self._pdf(lam, y) if y in self.support else 0.0
            return np.asarray([self.pdf(lam, v) for v in np.asarray(y).ravel()]).reshape(np.shape(y))
        y_arr = np.asarray(y, dtype=float)
        out = np.asarray(self._pdf(lam, y_arr), dtype=float)
        inside = (y_arr >= self.support.lower) & (y_arr <= self.support.upper)
        out = np.where(inside, out, 0.0)
        return float(out) if out.ndim == 0 else out

    def logpdf(self, lam, y):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(lam, y))

    def score(self, lam, y):
        """``d/dlam log f_lam(y)``; analytic when available, else 4th-order differences."""
        self.check_param(lam)
        if self._score is not None:
            return self._score(lam, y)
        if self.dim != 1:
            raise NotImplementedError("finite-difference score is one-dimensional")
        (bounds,) = self.bounds
        if np.ndim(y) == 0:
            return fd_score(lambda t: float(np.log(self._pdf(t, y))), float(lam), bounds)
        return np.asarray([self.score(lam, v) for v in np.asarray(y).ravel()]).reshape(np.shape(y))

    def center(self, lam) -> float:
        return float(self._center(lam)) if self._center is not None else 0.0

    def integrate(self, fn: Callable[[float], float], lam, tol: float | None = None) -> float:
        """Integrate ``fn(y)`` over the support, using ``lam`` to place the window."""
        return integrate(
            fn,
            self.support,
            tol=self.tol if tol is None else tol,
            center=self.center(lam) if self._center is not None else 0.0,
            scale=self.scale,
        )

    def memoized(self, name: str, lam, alpha, compute: Callable[[object], float]) -> float:
        """Cache a model integral ``compute(lam)``.

        Location families (``self.location``) reduce ``lam`` to 0 first, which
        is valid for integrals that are invariant under a common shift.
        """
        if getattr(self, "location", False):
            lam = 0.0
        key = (name, float(alpha), float(lam) if np.ndim(lam) == 0 else tuple(np.ravel(lam)))
        if key not in self._memo:
            if len(self._memo) > 4096:
                self._memo.clear()
            self._memo[key] = compute(lam)
        return self._memo[key]

    def power_integral(self, lam, alpha: float) -> float:
        """``int f_lam^alpha``."""
        self.check_param(lam)
        return self.memoized(
            "power", lam, alpha, lambda t: self.integrate(lambda y: self._pdf(t, y) ** alpha, t)
        )

    def at(self, lam) -> Density:
        """The member density ``f_lam``."""
        self.check_param(lam)
        if self.support.is_finite:
            values = self.support.values
            return FiniteDensity(values, [float(self._pdf(lam, v)) for v in values])
        return ContinuousDensity(
            lambda y: self.pdf(lam, y),
            self.support,
            center=self.center(lam),
            scale=self.scale,
        )

    # exact pmf ----------------------------------------------------------
    @property
    def has_exact_pmf(self) -> bool:
        return self._exact_pmf is not None

    def exact_pmf(self, y) -> sp.Expr:
        if self._exact_pmf is None:
            raise NotImplementedError(f"{self.name} has no exact pmf")
        return self._exact_pmf(y)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


def _dot(w, f_values):
    return sum(wi * fi for wi, fi in zip(w, f_values))


class ExponentialFamily(ParametricFamily):
    """``f = exp[h(y) + Z(lam) + w(lam)^T f(y)]``; ``Z`` solved from normalization if omitted."""

    def __init__(self, name, support, bounds, *, h, f_vec, w, Z=None, exact_pmf=None, **kw):
        self.h, self.f_vec, self.w, self._Z = h, tuple(f_vec), w, Z

        def pdf(lam, y):
            return np.exp(self.base(lam, y) + self.Z(lam))

        super().__init__(name, support, bounds, pdf, exact_pmf=exact_pmf, **kw)

    def base(self, lam, y):
        return self.h(y) + _dot(self.w(lam), [fi(y) for fi in self.f_vec])

    def Z(self, lam) -> float:
        if self._Z is not None:
            return self._Z(lam)
        mass = self.integrate(lambda y: np.exp(self.base(lam, y)), lam)
        return -math.log(mass)


class BAlphaFamily(ParametricFamily):
    """``f = [h(y) + Z(lam) + w(lam)^T f(y)]^(1/(alpha-1))`` on ``S``.

    ``Z`` may be omitted, in which case it is found by solving the 1-D
    normalization equation with a bracketing root finder. ``dw`` and ``dZ``
    are optional analytic derivatives. ``rectangle_components`` declares the
    indices ``i`` for which the range of ``(w_i)`` contains a rectangle of
    full dimension; it is required to build generalized UMVUEs.
    """

    def __init__(
        self,
        name,
        support,
        bounds,
        *,
        alpha: float,
        h: Callable,
        f_vec: Sequence[Callable],
        w: Callable,
        Z: Callable | None = None,
        dw: Callable | None = None,
        dZ: Callable | None = None,
        rectangle_components: tuple[int, ...] | None = None,
        exact_pmf=None,
        **kw,
    ):
        if not alpha > 0 or alpha == 1:
            raise DomainError("alpha must be positive and different from 1")
        self.alpha = float(alpha)
        self.h, self.f_vec, self.w, self._Z = h, tuple(f_vec), w, Z
        self.dw, self.dZ = dw, dZ
        self.rectangle_components = rectangle_components

        def pdf(lam, y):
            base = self.base(lam, y) + self.Z(lam)
            return _power_base(base, 1.0 / (self.alpha - 1.0))

        super().__init__(name, support, bounds, pdf, exact_pmf=exact_pmf, **kw)

    @property
    def d(self) -> int:
        return len(self.f_vec)

    def base(self, lam, y):
        return self.h(y) + _dot(self.w(lam), [fi(y) for fi in self.f_vec])

    def Z(self, lam) -> float:
        if self._Z is not None:
            return self._Z(lam)
        return _solve_normalizer(self, lam)

    def f_values(self, y) -> np.ndarray:
        """Stack of ``f_i(y)`` with the component index first."""
        return np.asarray([fi(np.asarray(y, dtype=float)) for fi in self.f_vec])


class MAlphaFamily(ParametricFamily):
    """``f = N(lam) [h(y) + w(lam)^T f(y)]^(1/(alpha-1))``, ``N`` normalizing."""

    def __init__(self, name, support, bounds, *, alpha, h, f_vec, w, N=None, exact_pmf=None, **kw):
        if not alpha > 0 or alpha == 1:
            raise DomainError("alpha must be positive and different from 1")
        self.alpha = float(alpha)
        self.h, self.f_vec, self.w, self._N = h, tuple(f_vec), w, N

        def pdf(lam, y):
            return self.N(lam) * self.kernel(lam, y)

        super().__init__(name, support, bounds, pdf, exact_pmf=exact_pmf, **kw)

    def kernel(self, lam, y):
        base = self.h(y) + _dot(self.w(lam), [fi(y) for fi in self.f_vec])
        return _power_base(base, 1.0 / (self.alpha - 1.0))

    def N(self, lam) -> float:
        if self._N is not None:
            return self._N(lam)
        return 1.0 / self.integrate(lambda y: self.kernel(lam, y), lam)


def _power_base(base, exponent):
    base = np.asarray(base, dtype=float)
    if np.any(base < 0) or (exponent < 0 and np.any(base == 0)):
        raise DomainError("power-form density base is not positive on the support")
    out = base**exponent
    return float(out) if out.ndim == 0 else out


def _solve_normalizer(fam: BAlphaFamily, lam) -> float:
    """Solve ``int [base + Z]^(1/(alpha-1)) = 1`` for ``Z``."""
    p = 1.0 / (fam.alpha - 1.0)
    if fam.support.is_finite:
        ys = fam.support.as_array()
        bases = np.asarray([fam.base(lam, y) for y in ys], dtype=float)
    else:
        raise NumericError(
            "normalizer Z must be supplied for continuous B^(alpha) families",
            family=fam.name,
        )
    z_min = -bases.min() + (1e-12 if p < 0 else 0.0)

    def mass(z):
        return float(np.sum((bases + z) ** p)) - 1.0

    hi = z_min + 1.0
    for _ in range(200):
        if np.sign(mass(hi)) != np.sign(mass(z_min + 1e-15)):
            break
        hi = z_min + 2.0 * (hi - z_min)
    else:
        raise NumericError("could not bracket the B^(alpha) normalizer", lam=lam)
    return optimize.brentq(mass, z_min + 1e-15, hi, xtol=1e-15, rtol=1e-15)


# ---------------------------------------------------------------------------
# Student location family


def _check_nu(nu):
    if not nu > 2:
        raise DomainError(f"degrees of freedom must exceed 2, got {nu}")


def student_log_constant(nu: float) -> float:
    """``log[Gamma((nu+1)/2) / (Gamma(nu/2) sqrt(pi nu))]``."""
    return gammaln((nu + 1) / 2) - gammaln(nu / 2) - 0.5 * math.log(math.pi * nu)


def student_pdf(y, nu: float, mu: float = 0.0):
    """Student-t density with unit scale, written out directly."""
    y = np.asarray(y, dtype=float)
    z = y - mu
    return np.exp(student_log_constant(nu) - 0.5 * (nu + 1) * np.log1p(z * z / nu))


def student_N(nu: float) -> float:
    """``N_nu = c_nu^(-2/(nu+1))`` where ``c_nu`` is the Student constant."""
    return math.exp(-2.0 / (nu + 1) * student_log_constant(nu))


def sigma_star(nu: float) -> float:
    """Scale of the deformed Gaussian induced by the Student(nu) family.

    ``sigma* = [2a/(1-a) * nu^(-(1+a)/2) * (G((nu+1)/2)/(G(nu/2) sqrt(pi)))^(a-1)]^(-1/2)``
    with ``a = 1 - 2/(nu+1)``, evaluated in log space.
    """
    _check_nu(nu)
    a = 1.0 - 2.0 / (nu + 1.0)
    log_ratio = gammaln((nu + 1) / 2) - gammaln(nu / 2) - 0.5 * math.log(math.pi)
    log_inner = (
        math.log(2 * a / (1 - a)) - 0.5 * (1 + a) * math.log(nu) + (a - 1) * log_ratio
    )
    return math.exp(-0.5 * log_inner)


def make_student_balpha(nu: float) -> BAlphaFamily:
    """Student location family (unit scale) as a one-parameter B^(alpha) family.

    ``alpha = 1 - 2/(nu+1)``, ``h = 0``, ``f = [y^2, y]``,
    ``w(mu) = [N/nu, -2 mu N/nu]``, ``Z(mu) = N (1 + mu^2/nu)``. Only the
    second component of ``w`` varies with ``mu``; its range is the whole line.
    """
    _check_nu(nu)
    alpha = 1.0 - 2.0 / (nu + 1.0)
    N = student_N(nu)

    def w(mu):
        return np.array([N / nu, -2.0 * mu * N / nu])

    def dw(mu):
        return np.array([0.0, -2.0 * N / nu])

    def score(mu, y):
        z = np.asarray(y, dtype=float) - mu
        return (nu + 1) * z / (nu + z * z)

    fam = BAlphaFamily(
        f"student(nu={nu:g})",
        IntervalSupport(),
        [(-math.inf, math.inf)],
        alpha=alpha,
        h=lambda y: 0.0 * np.asarray(y, dtype=float),
        f_vec=(lambda y: np.asarray(y, dtype=float) ** 2, lambda y: np.asarray(y, dtype=float)),
        w=w,
        Z=lambda mu: N * (1.0 + mu * mu / nu),
        dw=dw,
        dZ=lambda mu: 2.0 * N * mu / nu,
        rectangle_components=(1,),
        score=score,
        center=lambda mu: mu,
    )
    expo = 1.0 / (alpha - 1.0)
    c2, c1 = N / nu, -2.0 * N / nu

    def fast_pdf(mu, y):
        # same B^(alpha) expression with the components inlined
        if np.ndim(y) == 0 and np.ndim(mu) == 0:
            y = float(y)
            return (N * (1.0 + mu * mu / nu) + c2 * y * y + c1 * mu * y) ** expo
        y = np.asarray(y, dtype=float)
        return (N * (1.0 + mu * mu / nu) + c2 * y * y + c1 * mu * y) ** expo

    fam._pdf = fast_pdf
    fam.nu = nu
    fam.N_nu = N
    fam.location = True
    return fam


def make_normal_location(sigma: float = 1.0) -> ExponentialFamily:
    """``N(mu, sigma^2)`` with known ``sigma`` as a one-parameter exponential family."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    s2 = sigma * sigma
    fam = ExponentialFamily(
        f"normal(sigma={sigma:g})",
        IntervalSupport(),
        [(-math.inf, math.inf)],
        h=lambda y: -0.5 * np.asarray(y, dtype=float) ** 2 / s2,
        f_vec=(lambda y: np.asarray(y, dtype=float),),
        w=lambda mu: (mu / s2,),
        Z=lambda mu: -0.5 * mu * mu / s2 - 0.5 * math.log(2 * math.pi * s2),
        score=lambda mu, y: (np.asarray(y, dtype=float) - mu) / s2,
        center=lambda mu: mu,
        scale=sigma,
    )
    fam.location = True
    return fam


# ---------------------------------------------------------------------------
# Bernoulli instances


def _bernoulli_exact(y):
    return sp.cancel((1 - LAM) * (1 + y * (2 * LAM - 1) / (1 - LAM)))


def make_bernoulli_malpha() -> MAlphaFamily:
    """Bernoulli as an M^(2) family: ``h = 1``, ``f = y``, ``w = (2 lam - 1)/(1 - lam)``, ``N = 1 - lam``."""
    fam = MAlphaFamily(
        "bernoulli-malpha",
        FiniteSupport((0, 1)),
        [(0.0, 1.0)],
        alpha=2.0,
        h=lambda y: 1.0,
        f_vec=(lambda y: float(y),),
        w=lambda lam: ((2 * lam - 1) / (1 - lam),),
        N=lambda lam: 1.0 - lam,
        exact_pmf=_bernoulli_exact,
    )
    return fam


def make_bernoulli_balpha() -> BAlphaFamily:
    """Bernoulli as a B^(2) family: ``h = 0``, ``f = y``, ``w = 2 lam - 1``, ``Z = 1 - lam``."""
    return BAlphaFamily(
        "bernoulli-balpha",
        FiniteSupport((0, 1)),
        [(0.0, 1.0)],
        alpha=2.0,
        h=lambda y: 0.0,
        f_vec=(lambda y: float(y),),
        w=lambda lam: (2 * lam - 1,),
        Z=lambda lam: 1.0 - lam,
        dw=lambda lam: np.array([2.0]),
        dZ=lambda lam: -1.0,
        rectangle_components=(0,),
        exact_pmf=_bernoulli_exact,
    )


def make_bernoulli_exponential() -> ExponentialFamily:
    """Classical Bernoulli: ``f = y``, ``w = log(lam/(1-lam))``, ``Z = log(1-lam)``."""
    return ExponentialFamily(
        "bernoulli",
        FiniteSupport((0, 1)),
        [(0.0, 1.0)],
        h=lambda y: 0.0,
        f_vec=(lambda y: float(y),),
        w=lambda lam: (math.log(lam / (1 - lam)),),
        Z=lambda lam: math.log(1 - lam),
        exact_pmf=_bernoulli_exact,
    )


def make_finite_family(name: str, table, bounds=(0.0, 1.0)) -> ParametricFamily:
    """Finite-support family from ``(value, weight expression)`` rows.

    Expressions are strings or sympy expressions in ``lam`` and are kept
    exact; numeric evaluation goes through ``sympy.lambdify``.
    """
    values, exprs = [], []
    for value, expr in table:
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        values.append(value)
        exprs.append(sp.sympify(expr, locals={"lam": LAM, "lambda_": LAM}) if isinstance(expr, str) else sp.sympify(expr))
    extra = set().union(*(e.free_symbols for e in exprs)) - {LAM}
    if extra:
        raise DomainError(f"weight expressions may only use 'lam', found {sorted(map(str, extra))}")
    funcs = {v: sp.lambdify(LAM, e, "math") for v, e in zip(values, exprs)}
    exact = dict(zip(values, exprs))

    return ParametricFamily(
        name,
        FiniteSupport(tuple(values)),
        [tuple(bounds)],
        lambda lam, y: float(funcs[y](lam)),
        exact_pmf=lambda y: exact[y],
    )


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizationReport:
    ok: bool
    tol: float
    max_error: float
    errors: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok


def normalization_check(fam: ParametricFamily, lambda_grid, tol: float = 1e-10) -> NormalizationReport:
    """Check ``|int f_lam - 1| <= tol`` at every grid point.

    Finite families are summed; families with an exact pmf are additionally
    summed in rational arithmetic when the grid point is a Fraction.
    """
    errors = {}
    for lam in lambda_grid:
        fam.check_param(lam)
        if isinstance(lam, Fraction) and fam.has_exact_pmf:
            total = sum(fam.exact_pmf(v).subs(LAM, sp.Rational(lam.numerator, lam.denominator)) for v in fam.support.values)
            err = abs(float(sp.nsimplify(total) - 1))
        else:
            mass = fam.integrate(lambda y: fam._pdf(lam, y), lam, tol=min(tol, fam.tol) * 1e-2)
            err = abs(mass - 1.0)
        errors[float(lam)] = err
    max_error = max(errors.values()) if errors else 0.0
    return NormalizationReport(max_error <= tol, tol, max_error, errors)
