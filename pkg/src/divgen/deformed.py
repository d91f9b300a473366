"""Deformed distributions ``exp[L_G] / int exp[L_G]`` over n-sample spaces.

Two variants exist. ``FiniteDeformed`` enumerates the sample space of a
finite-support family. Its pmf is carried as exact rational functions of
``lam`` when ``exp[L_G]`` is rational in ``lam``; otherwise only the
floating-point path is used. ``GaussianDeformed`` is the closed form
induced by the Student location family: i.i.d. normal coordinates with
scale ``sigma*``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy as sp
from scipy.special import logsumexp

from .errors import DomainError, PreconditionError, UsageError
from .families import LAM, ParametricFamily, sigma_star
from .glf import GeneralizedLikelihood, Statistic, level_sets, sample_space
from .numerics import IntervalSupport, integrate, norm_pdf

__all__ = [
    "FiniteDeformed",
    "GaussianDeformed",
    "StatisticPMF",
    "Conditional",
    "build_deformed_finite",
    "build_deformed_student",
    "to_fraction",
    "to_sympy",
]

LAMBDA_FREE_TOL = 1e-10


def to_sympy(x):
    if isinstance(x, Fraction):
        return sp.Rational(x.numerator, x.denominator)
    if isinstance(x, (int, np.integer)):
        return sp.Integer(int(x))
    if isinstance(x, (float, np.floating)):
        return sp.nsimplify(float(x), rational=True)
    return sp.sympify(x)


def to_fraction(expr) -> Fraction:
    """Convert a sympy rational number (or int/Fraction) to ``Fraction``."""
    if isinstance(expr, (int, Fraction)):
        return Fraction(expr)
    expr = sp.sympify(expr)
    if not expr.is_Rational:
        expr = sp.cancel(sp.together(expr))
    if not expr.is_Rational:
        raise DomainError(f"{expr} is not a rational number")
    return Fraction(int(expr.p), int(expr.q))


def _is_lambda_rational(expr) -> bool:
    return bool(sp.sympify(expr).is_rational_function(LAM)) and not sp.sympify(expr).has(sp.exp, sp.log)


def _default_grid(fam: ParametricFamily):
    return fam.grid(9, 0.1, 0.9)


@dataclass
class StatisticPMF:
    """Marginal pmf ``g~_lam(t)`` of a statistic under a finite deformed distribution."""

    values: list
    level_sets: dict
    exact: dict | None
    _dist: "FiniteDeformed" = field(repr=False)

    def __call__(self, lam) -> dict:
        probs = self._dist.pmf(lam)
        index = self._dist.index
        out = {}
        for t, members in self.level_sets.items():
            out[t] = sum(probs[index[y]] for y in members)
        return out

    def as_array(self, lam) -> np.ndarray:
        table = self(lam)
        return np.asarray([float(table[t]) for t in self.values])


@dataclass
class Conditional:
    """Deformed conditional distribution over a level set ``C_t``."""

    t: object
    members: list
    exact: list | None
    lambda_free: bool
    max_variation: float
    _dist: "FiniteDeformed" = field(repr=False)

    def probs(self, lam) -> list:
        if self.exact is not None and (isinstance(lam, Fraction) or self.lambda_free):
            vals = [e if not e.free_symbols else e.subs(LAM, to_sympy(lam)) for e in self.exact]
            return [to_fraction(v) if isinstance(lam, Fraction) or self.lambda_free else float(v) for v in vals]
        probs = self._dist.pmf(lam)
        sub = [probs[self._dist.index[y]] for y in self.members]
        total = sum(sub)
        return [p / total for p in sub]


class FiniteDeformed:
    """Deformed distribution on the n-tuples of a finite support.

    Parameters
    ----------
    glf : GeneralizedLikelihood
    n : int
    cap : int
        Maximum number of sample tuples.
    """

    def __init__(self, glf: GeneralizedLikelihood, n: int, cap: int = 10**6):
        if n < 1:
            raise DomainError("sample size must be at least 1")
        self.glf = glf
        self.family = glf.family
        self.n = n
        self.space = sample_space(self.family, n, cap)
        self.index = {y: i for i, y in enumerate(self.space)}
        self.exact_pmf = self._build_exact()
        self._lambdified = (
            sp.lambdify(LAM, self.exact_pmf, "numpy") if self.exact_pmf is not None else None
        )

    def _build_exact(self):
        if not self.family.has_exact_pmf:
            return None
        weights = [sp.cancel(sp.together(self.glf.exact_weight(y))) for y in self.space]
        if not all(_is_lambda_rational(w) for w in weights):
            return None
        total = sp.cancel(sp.together(sp.Add(*weights)))
        return [sp.cancel(w / total) for w in weights]

    @property
    def is_exact(self) -> bool:
        return self.exact_pmf is not None

    def __len__(self):
        return len(self.space)

    # evaluation ---------------------------------------------------------
    def pmf(self, lam):
        """Probabilities of every tuple, in ``space`` order.

        A ``Fraction`` parameter on an exact instance returns a list of
        Fractions; otherwise a float array.
        """
        self.family.check_param(float(lam))
        if self.is_exact and isinstance(lam, Fraction):
            r = to_sympy(lam)
            return [to_fraction(e.subs(LAM, r)) for e in self.exact_pmf]
        if self._lambdified is not None:
            vals = self._lambdified(float(lam))
            return np.asarray([float(v) for v in vals])
        logw = np.asarray([self.glf(y, float(lam)) for y in self.space])
        return np.exp(logw - logsumexp(logw))

    def expectation(self, phi: Callable, lam):
        probs = self.pmf(lam)
        return sum(p * phi(y) for p, y in zip(probs, self.space))

    def variance(self, phi: Callable, lam):
        m = self.expectation(phi, lam)
        return self.expectation(lambda y: (phi(y) - m) ** 2, lam)

    def expectation_exact(self, phi: Callable) -> sp.Expr:
        """``E~_lam[phi]`` as a rational function of ``lam``."""
        self._require_exact()
        total = sp.Add(*[to_sympy(phi(y)) * p for y, p in zip(self.space, self.exact_pmf)])
        return sp.factor(sp.cancel(sp.together(total)))

    def _require_exact(self):
        if not self.is_exact:
            from .errors import UnsupportedInstanceError

            raise UnsupportedInstanceError(
                "deformed pmf is not rational in lam; use the grid-based checks instead"
            )

    # statistics ---------------------------------------------------------
    def statistic_pmf(self, T: Statistic) -> StatisticPMF:
        sets = level_sets(T, self.space)
        exact = None
        if self.is_exact:
            exact = {
                t: sp.factor(sp.cancel(sp.Add(*[self.exact_pmf[self.index[y]] for y in members])))
                for t, members in sets.items()
            }
        return StatisticPMF(list(sets), sets, exact, self)

    def conditional_given_T(self, T: Statistic, t, grid=None) -> Conditional:
        sets = level_sets(T, self.space)
        members = sets.get(t)
        if members is None:
            raise DomainError(f"statistic value {t!r} has an empty level set")
        exact = None
        if self.is_exact:
            sub = [self.exact_pmf[self.index[y]] for y in members]
            total = sp.cancel(sp.Add(*sub))
            exact = [sp.cancel(p / total) for p in sub]
        grid = _default_grid(self.family) if grid is None else grid
        table = np.asarray([self._float_conditional(members, lam) for lam in grid])
        variation = float(np.max(np.ptp(table, axis=0))) if len(grid) > 1 else 0.0
        if exact is not None:
            free = all(LAM not in e.free_symbols for e in exact)
        else:
            free = variation <= LAMBDA_FREE_TOL
        return Conditional(t, members, exact, free, variation, self)

    def _float_conditional(self, members, lam):
        probs = self.pmf(float(lam))
        sub = np.asarray([probs[self.index[y]] for y in members])
        return sub / sub.sum()

    def rao_blackwellize(self, estimator: Callable, T: Statistic, grid=None) -> "RaoBlackwellized":
        """``t -> E~[estimator | T = t]``; requires every conditional to be lam-free."""
        table = {}
        for t in level_sets(T, self.space):
            cond = self.conditional_given_T(T, t, grid)
            if not cond.lambda_free:
                raise PreconditionError(
                    f"conditional given {T.name}={t!r} depends on lam "
                    f"(variation {cond.max_variation:.3g}); T is not sufficient"
                )
            if cond.exact is not None:
                probs = [to_fraction(e) for e in cond.exact]
            else:
                probs = list(self._float_conditional(cond.members, _default_grid(self.family)[4]))
            table[t] = sum(p * _exactify(estimator(y)) for p, y in zip(probs, cond.members))
        return RaoBlackwellized(T, table)


def _exactify(v):
    if isinstance(v, (int, Fraction)):
        return v
    return float(v)


@dataclass
class RaoBlackwellized:
    """Estimator ``y -> table[T(y)]``."""

    statistic: Statistic
    table: dict

    def __call__(self, y):
        return self.table[self.statistic(y)]

    def of_t(self, t):
        return self.table[t]


def build_deformed_finite(fam: ParametricFamily, glf: GeneralizedLikelihood, n: int, cap: int = 10**6) -> FiniteDeformed:
    if glf.family is not fam:
        raise UsageError("generalized likelihood belongs to a different family")
    return FiniteDeformed(glf, n, cap)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianDeformed:
    """i.i.d. ``N(mu, sigma*^2)`` coordinates; ``Ybar ~ N(mu, sigma*^2/n)``."""

    mu: float
    sigma_star: float
    n: int

    def __post_init__(self):
        if not self.sigma_star > 0:
            raise DomainError("sigma* must be positive")
        if self.n < 1:
            raise DomainError("sample size must be at least 1")

    @property
    def ybar_sd(self) -> float:
        return self.sigma_star / math.sqrt(self.n)

    def at(self, mu: float) -> "GaussianDeformed":
        return GaussianDeformed(mu, self.sigma_star, self.n)

    def pdf(self, y: Sequence[float]) -> float:
        z = (np.asarray(y, dtype=float) - self.mu) / self.sigma_star
        return float(np.prod(norm_pdf(z) / self.sigma_star))

    def ybar_pdf(self, t):
        return norm_pdf((np.asarray(t, dtype=float) - self.mu) / self.ybar_sd) / self.ybar_sd

    def expectation_ybar(self, g: Callable[[float], float], tol: float = 1e-12) -> float:
        """``E~[g(Ybar)]`` by quadrature over the normal marginal of ``Ybar``."""
        sd = self.ybar_sd

        def integrand(z):
            return g(self.mu + sd * z) * norm_pdf(z)

        return integrate(integrand, IntervalSupport(), tol=tol, center=0.0, scale=1.0)

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """``m`` draws of the n-tuple, one per row."""
        return rng.normal(self.mu, self.sigma_star, size=(m, self.n))


def build_deformed_student(nu: float, mu: float, n: int) -> GaussianDeformed:
    return GaussianDeformed(float(mu), sigma_star(nu), n)
