"""Generalized likelihood functions, statistics, and sufficiency checks."""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Hashable, Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np
import sympy as sp

from .errors import DomainError, UsageError
from .families import ParametricFamily

__all__ = [
    "GLFKind",
    "GeneralizedLikelihood",
    "Statistic",
    "mean_statistic",
    "sum_statistic",
    "identity_statistic",
    "coordinate_statistic",
    "constant_statistic",
    "balpha_statistic",
    "parse_statistic",
    "sample_space",
    "level_sets",
    "SufficiencyReport",
    "sufficiency_check",
    "factorization_check",
    "minimal_sufficiency_check",
]


class GLFKind(str, Enum):
    LOG = "log"
    DPD_MEAN = "dpd"
    LDPD = "ldpd"
    DPD_SUM = "dpd-sum"


@dataclass(frozen=True, eq=False)
class GeneralizedLikelihood:
    """A generalized likelihood ``L_G(y; lam)`` attached to a family.

    ``LOG`` is the log-likelihood, ``DPD_MEAN`` the mean form associated with
    the DPD, ``LDPD`` the one associated with the logarithmic DPD, and
    ``DPD_SUM`` the sum form (``n`` times the mean form).
    """

    kind: GLFKind
    family: ParametricFamily
    alpha: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", GLFKind(self.kind))
        if self.kind is not GLFKind.LOG:
            if self.alpha is None:
                object.__setattr__(self, "alpha", self.family.alpha)
            if self.alpha is None or not self.alpha > 0 or self.alpha == 1:
                raise DomainError(f"alpha must be positive and different from 1, got {self.alpha!r}")

    def power_integral(self, lam) -> float:
        """``int f_lam^alpha``, cached per parameter value.

        Location families share one value, since the integral is shift invariant.
        """
        fam = self.family
        if getattr(fam, "location", False):
            lam = 0.0
        key = float(lam) if np.ndim(lam) == 0 else tuple(np.ravel(lam))
        if key not in self._cache:
            if fam.support.is_finite:
                value = sum(float(fam.pdf(lam, v)) ** self.alpha for v in fam.support.values)
            else:
                value = fam.power_integral(lam, self.alpha)
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = value
        return self._cache[key]

    def __call__(self, sample, lam) -> float:
        fam = self.family
        fam.check_param(lam)
        dens = np.asarray([fam.pdf(lam, y) for y in sample], dtype=float)
        n = len(dens)
        a = self.alpha
        if self.kind is GLFKind.LOG:
            if np.any(dens <= 0):
                raise DomainError("log-likelihood of a zero-density observation")
            return float(np.sum(np.log(dens)))
        if self.kind is GLFKind.LDPD:
            inner = float(np.mean(dens ** (a - 1)))
            if inner <= 0:
                raise DomainError("LDPD likelihood needs a positive power mean")
            return math.log(inner) / (a - 1) - math.log(self.power_integral(lam)) / a
        mean_form = float(np.mean((a * dens ** (a - 1) - 1) / (a - 1))) - self.power_integral(lam)
        return n * mean_form if self.kind is GLFKind.DPD_SUM else mean_form

    def exact_weight(self, sample) -> sp.Expr:
        """``exp[L_G(y; lam)]`` up to a factor that does not depend on ``y``.

        Needs the family's exact pmf. LOG gives a product of pmfs, LDPD a
        power mean; the DPD forms keep an ``exp`` and are therefore rational
        in ``lam`` only in degenerate cases.
        """
        fam = self.family
        pmfs = [fam.exact_pmf(y) for y in sample]
        n = len(pmfs)
        if self.kind is GLFKind.LOG:
            return sp.Mul(*pmfs)
        a = sp.nsimplify(self.alpha)
        if self.kind is GLFKind.LDPD:
            inner = sp.Add(*[p ** (a - 1) for p in pmfs]) / n
            return inner ** (1 / (a - 1))
        total = sp.Add(*[p ** (a - 1) for p in pmfs]) * a / (a - 1)
        return sp.exp(total if self.kind is GLFKind.DPD_SUM else total / n)


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True, eq=False)
class Statistic:
    """A named map from sample tuples to hashable values.

    ``vectorized`` optionally maps a 2-D array of samples (one per row) to an
    array of values; Monte Carlo code uses it when present.
    """

    name: str
    fn: Callable[[tuple], Hashable]
    vectorized: Callable[[np.ndarray], np.ndarray] | None = None
    real_valued: bool = False

    def __call__(self, sample) -> Hashable:
        return self.fn(tuple(sample))

    def apply_rows(self, samples: np.ndarray) -> np.ndarray:
        if self.vectorized is not None:
            return self.vectorized(samples)
        return np.asarray([self.fn(tuple(row)) for row in samples])


def _exact(v):
    if isinstance(v, (int, Fraction)):
        return v
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return v


def _exact_mean(sample):
    values = [_exact(v) for v in sample]
    if all(isinstance(v, (int, Fraction)) for v in values):
        return Fraction(sum(values), len(values))
    return float(np.mean(values))


mean_statistic = Statistic("mean", _exact_mean, lambda a: np.mean(a, axis=-1), real_valued=True)
sum_statistic = Statistic("sum", lambda s: sum(_exact(v) for v in s), lambda a: np.sum(a, axis=-1), real_valued=True)
identity_statistic = Statistic("identity", lambda s: tuple(s))


def coordinate_statistic(i: int) -> Statistic:
    return Statistic(f"coordinate:{i}", lambda s: s[i], lambda a: a[..., i], real_valued=True)


def constant_statistic(c=0) -> Statistic:
    return Statistic("constant", lambda s: c, lambda a: np.full(a.shape[:-1], c))


def balpha_statistic(fam, components: Sequence[int] | None = None) -> Statistic:
    """``f-bar``: coordinatewise sample means of the B^(alpha) components ``f_i``."""
    comps = tuple(range(len(fam.f_vec))) if components is None else tuple(components)

    def fn(sample):
        vals = tuple(float(np.mean([fam.f_vec[i](y) for y in sample])) for i in comps)
        return vals[0] if len(vals) == 1 else vals

    def vec(a):
        out = np.stack([np.mean(fam.f_vec[i](a), axis=-1) for i in comps], axis=-1)
        return out[..., 0] if len(comps) == 1 else out

    return Statistic("fbar" if components is None else f"fbar{list(comps)}", fn, vec, real_valued=True)


def parse_statistic(spec: str) -> Statistic:
    """``mean | sum | identity | constant | coordinate:i``."""
    if spec == "mean":
        return mean_statistic
    if spec == "sum":
        return sum_statistic
    if spec == "identity":
        return identity_statistic
    if spec == "constant":
        return constant_statistic()
    if spec.startswith("coordinate:"):
        try:
            return coordinate_statistic(int(spec.split(":", 1)[1]))
        except ValueError:
            pass
    raise UsageError(f"unknown statistic {spec!r}")


def sample_space(fam: ParametricFamily, n: int, cap: int = 10**6) -> list[tuple]:
    """All n-tuples over a finite support, in lexicographic order."""
    from .errors import ResourceError

    if not fam.support.is_finite:
        raise DomainError(f"{fam.name} does not have a finite support")
    size = len(fam.support) ** n
    if size > cap:
        raise ResourceError(f"sample space has {size} points, above the cap {cap}")
    return list(itertools.product(fam.support.values, repeat=n))


def _sort_key(t):
    try:
        return (0, float(t), ())
    except (TypeError, ValueError):
        return (1, 0.0, repr(t))


def level_sets(T: Statistic, space: Iterable[tuple]) -> dict:
    """``{t: [samples with T = t]}`` ordered by ``t``; the sets partition ``space``."""
    sets: dict = {}
    for y in space:
        sets.setdefault(T(y), []).append(y)
    return dict(sorted(sets.items(), key=lambda kv: _sort_key(kv[0])))


# ---------------------------------------------------------------------------
# sufficiency


@dataclass
class SufficiencyReport:
    sufficient: bool
    tol: float
    max_deviation: float
    pairs_checked: int
    violations: list = field(default_factory=list)
    reference_lambda: float | None = None

    def __bool__(self):
        return self.sufficient

    def to_dict(self):
        return {
            "sufficient": self.sufficient,
            "tol": self.tol,
            "max_deviation": self.max_deviation,
            "pairs_checked": self.pairs_checked,
            "reference_lambda": self.reference_lambda,
            "violations": [
                {"r": _jsonable(r), "s": _jsonable(s), "deviation": d} for r, s, d in self.violations[:20]
            ],
        }


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (tuple, list)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def _values_equal(a, b, rtol=1e-12) -> bool:
    if isinstance(a, (tuple, list, np.ndarray)) or isinstance(b, (tuple, list, np.ndarray)):
        a_arr, b_arr = np.asarray(a, dtype=object), np.asarray(b, dtype=object)
        if a_arr.shape != b_arr.shape:
            return False
        return all(_values_equal(x, y, rtol) for x, y in zip(a_arr.ravel(), b_arr.ravel()))
    if isinstance(a, float) or isinstance(b, float):
        return math.isclose(float(a), float(b), rel_tol=rtol, abs_tol=rtol)
    return a == b


def _grid_and_ref(lambda_grid, ref_index):
    grid = list(lambda_grid)
    if not grid:
        raise UsageError("lambda grid is empty")
    idx = len(grid) // 2 if ref_index is None else ref_index
    return grid, grid[idx]


def _deviation(glf, r, s, grid, ref) -> float:
    d0 = glf(r, ref) - glf(s, ref)
    return max(abs((glf(r, lam) - glf(s, lam)) - d0) for lam in grid)


def sufficiency_check(
    T: Statistic,
    glf: GeneralizedLikelihood,
    lambda_grid,
    pairs: Sequence[tuple] | None = None,
    *,
    n: int | None = None,
    tol: float = 1e-10,
    ref_index: int | None = None,
) -> SufficiencyReport:
    """Check that ``L_G(r; lam) - L_G(s; lam)`` is free of ``lam`` whenever ``T(r) = T(s)``.

    With ``pairs=None`` the finite sample space of size ``n`` is enumerated;
    each level set is checked against its first member, which covers all pairs.
    The reference point is the grid midpoint unless ``ref_index`` is given.
    """
    grid, ref = _grid_and_ref(lambda_grid, ref_index)
    if pairs is None:
        if n is None:
            raise UsageError("need either explicit pairs or a sample size n")
        pairs = []
        for members in level_sets(T, sample_space(glf.family, n)).values():
            pairs.extend((members[0], s) for s in members[1:])
    violations, worst, checked = [], 0.0, 0
    for r, s in pairs:
        if not _values_equal(T(r), T(s)):
            continue
        checked += 1
        dev = _deviation(glf, r, s, grid, ref)
        worst = max(worst, dev)
        if dev > tol:
            violations.append((tuple(r), tuple(s), dev))
    return SufficiencyReport(not violations, tol, worst, checked, violations, float(ref))


def factorization_check(
    T: Statistic,
    glf: GeneralizedLikelihood,
    lambda_grid,
    *,
    n: int,
    tol: float = 1e-10,
    ref_index: int | None = None,
) -> SufficiencyReport:
    """Fit ``L_G(y; lam) = p(lam, T(y)) + q(y)`` on a finite space and report the residual.

    ``p(lam, t)`` is ``L_G`` at the first member of ``C_t`` and
    ``q(y) = L_G(y; lam0) - p(lam0, T(y))``.
    """
    grid, ref = _grid_and_ref(lambda_grid, ref_index)
    sets = level_sets(T, sample_space(glf.family, n))
    violations, worst = [], 0.0
    for members in sets.values():
        rep = members[0]
        p = {lam: glf(rep, lam) for lam in grid}
        p_ref = glf(rep, ref)
        for y in members:
            q = glf(y, ref) - p_ref
            resid = max(abs(glf(y, lam) - p[lam] - q) for lam in grid)
            worst = max(worst, resid)
            if resid > tol:
                violations.append((tuple(rep), tuple(y), resid))
    total = sum(len(m) for m in sets.values())
    return SufficiencyReport(not violations, tol, worst, total, violations, float(ref))


def minimal_sufficiency_check(
    T: Statistic, glf: GeneralizedLikelihood, lambda_grid, *, n: int, tol: float = 1e-10
) -> bool:
    """On a finite space: ``T(r) = T(s)`` iff ``L_G(r) - L_G(s)`` is free of ``lam``.

    Only verifiable by enumeration; continuous families are not covered.
    """
    grid, ref = _grid_and_ref(lambda_grid, None)
    space = sample_space(glf.family, n)
    for r, s in itertools.combinations(space, 2):
        same_t = _values_equal(T(r), T(s))
        free = _deviation(glf, r, s, grid, ref) <= tol
        if same_t != free:
            return False
    return True
