"""Generalized completeness, ancillarity, Basu independence and the UMVUE criterion.

On finite instances with a rational deformed pmf, ``E~_lam[h(T)] = 0`` for
all ``lam`` is a polynomial identity once denominators are cleared: every
coefficient of ``lam^k`` must vanish, and those coefficients are linear in
the unknown values ``h(t)``. The question therefore reduces to an exact
null-space computation. A floating-point SVD kernel is computed alongside
and any disagreement in dimension is treated as an error.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from ._linalg import integer_normalize, nullspace_exact, nullspace_float, row_echelon
from .deformed import FiniteDeformed, GaussianDeformed, to_fraction, to_sympy
from .errors import NumericError, UnsupportedInstanceError
from .families import LAM
from .glf import Statistic, sufficiency_check

__all__ = [
    "CompletenessReport",
    "AncillarityReport",
    "BasuReport",
    "OrthogonalityReport",
    "coefficient_matrix",
    "completeness_check",
    "completeness_grid_check",
    "ancillarity_check",
    "basu_independence_test",
    "basu_gaussian_mc",
    "find_basu_pairs",
    "umvue_orthogonality_check",
    "solve_unbiased",
]

COMPLETE = "COMPLETE"
INCOMPLETE = "INCOMPLETE"
INCONCLUSIVE = "INCONCLUSIVE"


def coefficient_matrix(exprs: Sequence[sp.Expr]) -> tuple[list[list[Fraction]], sp.Expr]:
    """Coefficients of ``sum_j h_j exprs[j]`` after clearing the common denominator.

    Returns ``(A, D)`` with ``A[k][j]`` the coefficient of ``lam^k`` in
    ``D * exprs[j]``.
    """
    parts = [sp.fraction(sp.cancel(sp.together(e))) for e in exprs]
    if not all(_is_poly(num) and _is_poly(den) for num, den in parts):
        raise UnsupportedInstanceError("pmf is not a rational function of lam")
    common = sp.Integer(1)
    for _, den in parts:
        common = sp.lcm(common, den)
    polys = [sp.Poly(sp.cancel(num * common / den), LAM) for num, den in parts]
    degree = max((p.degree() for p in polys), default=0)
    degree = max(degree, 0)
    matrix = []
    for k in range(degree + 1):
        matrix.append([to_fraction(p.coeff_monomial(LAM**k)) for p in polys])
    return matrix, common


def _is_poly(expr) -> bool:
    return bool(sp.sympify(expr).is_polynomial(LAM))


def _float_kernel_dim(matrix, ncols) -> int:
    return nullspace_float(matrix, ncols).shape[1]


def _check_kernel(matrix, ncols, exact_dim):
    float_dim = _float_kernel_dim(matrix, ncols)
    if float_dim != exact_dim:
        raise NumericError(
            "exact and floating-point kernels disagree",
            exact_dim=exact_dim,
            float_dim=float_dim,
        )
    return float_dim


def _canonical_vector(basis: list[list[Fraction]]) -> list[int]:
    """The basis vector whose leading nonzero entry sits furthest right."""
    def lead(v):
        return next(i for i, x in enumerate(v) if x != 0)

    best = max(basis, key=lead)
    return integer_normalize(best)


def _reversed_nullspace(matrix, ncols):
    rev = [list(reversed(row)) for row in matrix]
    return [list(reversed(v)) for v in nullspace_exact(rev, ncols)]


def _fmt(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    if isinstance(x, tuple):
        return [_fmt(v) for v in x]
    return x


# ---------------------------------------------------------------------------
# completeness


@dataclass
class CompletenessReport:
    verdict: str
    statistic: str
    values: list
    kernel_dim: int
    rank: int
    float_kernel_dim: int | None = None
    witness: dict | None = None
    witness_vector: list | None = None
    kernel_basis: list = field(default_factory=list)
    certificate: tuple | None = None
    matrix: list | None = None
    method: str = "exact"

    @property
    def complete(self) -> bool:
        return self.verdict == COMPLETE

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "statistic": self.statistic,
            "method": self.method,
            "values": [_fmt(t) for t in self.values],
            "kernel_dim": self.kernel_dim,
            "float_kernel_dim": self.float_kernel_dim,
            "rank": self.rank,
            "witness": None if self.witness_vector is None else [_fmt(x) for x in self.witness_vector],
            "kernel_basis": [[_fmt(x) for x in v] for v in self.kernel_basis],
            "certificate": None if self.certificate is None else _fmt(self.certificate),
        }


def _certify_nonzero(dist: FiniteDeformed, T: Statistic, h: dict):
    """A tuple with ``h(T(y)) != 0`` and positive deformed mass at a grid point."""
    grid = dist.family.grid(9)
    lam = Fraction(float(grid[4])).limit_denominator(10**6) if dist.is_exact else float(grid[4])
    probs = dist.pmf(lam)
    for y, p in zip(dist.space, probs):
        if h[T(y)] != 0 and p > 0:
            return y, lam
    return None


def verify_witness(dist: FiniteDeformed, T: Statistic, h: dict, tol: float = 1e-12) -> bool:
    """Re-check both witness conditions: the exact identity and a grid bound, plus P~{h != 0} > 0."""
    if dist.is_exact:
        expr = dist.expectation_exact(lambda y: h[T(y)])
        if sp.simplify(expr) != 0:
            return False
    grid = dist.family.grid(9)
    worst = max(abs(float(dist.expectation(lambda y: float(h[T(y)]), float(lam)))) for lam in grid)
    return worst <= tol and _certify_nonzero(dist, T, h) is not None


def completeness_check(dist: FiniteDeformed, T: Statistic, *, verify: bool = True) -> CompletenessReport:
    """Decide generalized completeness of ``T`` exactly.

    The witness for an incomplete statistic is canonical: elimination runs
    over the T-values in reverse order and the kernel vector whose first
    nonzero entry has the largest index is reported, scaled to coprime
    integers with a positive leading entry.
    """
    if not dist.is_exact:
        raise UnsupportedInstanceError(
            "deformed pmf is not rational in lam; use the grid-based test (--method grid) instead"
        )
    pmf = dist.statistic_pmf(T)
    values = pmf.values
    matrix, _ = coefficient_matrix([pmf.exact[t] for t in values])
    ncols = len(values)
    basis = nullspace_exact(matrix, ncols)
    rank = ncols - len(basis)
    float_dim = _check_kernel(matrix, ncols, len(basis))
    if not basis:
        return CompletenessReport(COMPLETE, T.name, values, 0, rank, float_dim, matrix=matrix)
    vec = _canonical_vector(_reversed_nullspace(matrix, ncols))
    h = {t: Fraction(v) for t, v in zip(values, vec)}
    cert = _certify_nonzero(dist, T, h)
    report = CompletenessReport(
        INCOMPLETE,
        T.name,
        values,
        len(basis),
        rank,
        float_dim,
        witness=h,
        witness_vector=vec,
        kernel_basis=[integer_normalize(v) for v in basis],
        certificate=cert,
        matrix=matrix,
    )
    if verify and not verify_witness(dist, T, h):
        raise NumericError("completeness witness failed re-verification", witness=vec)
    return report


def completeness_grid_check(dist: FiniteDeformed, T: Statistic, grid=None, threshold: float = 1e-10) -> CompletenessReport:
    """Grid-based test usable for any finite instance.

    A trivial kernel of the ``grid x T-values`` matrix proves completeness
    (an ``h`` vanishing in expectation everywhere vanishes on the grid). A
    nontrivial grid kernel is only suggestive, so the verdict is
    ``INCONCLUSIVE`` and the numerical kernel is returned.
    """
    grid = dist.family.grid(max(9, 2 * len(dist.space))) if grid is None else grid
    pmf = dist.statistic_pmf(T)
    mat = np.asarray([pmf.as_array(float(lam)) for lam in grid])
    kernel = nullspace_float(mat, len(pmf.values), threshold)
    k = kernel.shape[1]
    verdict = COMPLETE if k == 0 else INCONCLUSIVE
    return CompletenessReport(
        verdict,
        T.name,
        pmf.values,
        k,
        len(pmf.values) - k,
        k,
        kernel_basis=[list(map(float, kernel[:, i])) for i in range(k)],
        method="grid",
    )


# ---------------------------------------------------------------------------
# ancillarity


@dataclass
class AncillarityReport:
    ancillary: bool
    statistic: str
    max_variation: float
    pmf: dict

    def __bool__(self):
        return self.ancillary

    def to_dict(self):
        return {
            "ancillary": self.ancillary,
            "statistic": self.statistic,
            "max_variation": self.max_variation,
            "pmf": {str(_fmt(k)): str(v) for k, v in self.pmf.items()},
        }


def ancillarity_check(dist: FiniteDeformed, A: Statistic, grid=None, tol: float = 1e-10) -> AncillarityReport:
    """``A`` is ancillary iff its deformed pmf does not depend on ``lam``."""
    grid = dist.family.grid(9) if grid is None else grid
    pmf = dist.statistic_pmf(A)
    table = np.asarray([pmf.as_array(float(lam)) for lam in grid])
    variation = float(np.max(np.ptp(table, axis=0)))
    if pmf.exact is not None:
        free = all(LAM not in sp.sympify(e).free_symbols for e in pmf.exact.values())
        shown = pmf.exact
    else:
        free = variation <= tol
        shown = {t: table[len(grid) // 2][i] for i, t in enumerate(pmf.values)}
    return AncillarityReport(free, A.name, variation, shown)


# ---------------------------------------------------------------------------
# Basu


INDEPENDENT = "INDEPENDENT"
DEPENDENT = "DEPENDENT"
PRECONDITION_FAILED = "PRECONDITION_FAILED"


@dataclass
class BasuReport:
    status: str
    max_deviation: float
    reason: str = ""
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"status": self.status, "max_deviation": self.max_deviation, "reason": self.reason, **self.details}


def _joint_deviation(dist: FiniteDeformed, T: Statistic, A: Statistic, grid):
    worst = 0.0
    for lam in grid:
        probs = dist.pmf(float(lam))
        joint, pt, pa = {}, {}, {}
        for p, y in zip(probs, dist.space):
            t, a = T(y), A(y)
            joint[(t, a)] = joint.get((t, a), 0.0) + p
            pt[t] = pt.get(t, 0.0) + p
            pa[a] = pa.get(a, 0.0) + p
        for t in pt:
            for a in pa:
                worst = max(worst, abs(joint.get((t, a), 0.0) - pt[t] * pa[a]))
    return worst


def _joint_exact(dist: FiniteDeformed, T: Statistic, A: Statistic) -> bool:
    joint, pt, pa = {}, {}, {}
    for p, y in zip(dist.exact_pmf, dist.space):
        t, a = T(y), A(y)
        joint[(t, a)] = joint.get((t, a), 0) + p
        pt[t] = pt.get(t, 0) + p
        pa[a] = pa.get(a, 0) + p
    return all(
        sp.cancel(joint.get((t, a), 0) - pt[t] * pa[a]) == 0 for t in pt for a in pa
    )


def basu_independence_test(
    dist: FiniteDeformed,
    T: Statistic,
    A: Statistic,
    *,
    grid=None,
    tol: float = 1e-12,
    check_preconditions: bool = True,
) -> BasuReport:
    """Check that the joint deformed pmf of ``(T, A)`` factorizes.

    Preconditions (``T`` sufficient and complete, ``A`` ancillary) are
    verified first; a failure is reported as ``PRECONDITION_FAILED`` rather
    than as dependence.
    """
    grid = dist.family.grid(9) if grid is None else grid
    if check_preconditions:
        anc = ancillarity_check(dist, A, grid)
        if not anc.ancillary:
            return BasuReport(PRECONDITION_FAILED, math.nan, f"{A.name} is not ancillary",
                              {"ancillarity_variation": anc.max_variation})
        suff = sufficiency_check(T, dist.glf, grid, n=dist.n)
        if not suff.sufficient:
            return BasuReport(PRECONDITION_FAILED, math.nan, f"{T.name} is not sufficient",
                              {"sufficiency_deviation": suff.max_deviation})
        comp = completeness_check(dist, T) if dist.is_exact else completeness_grid_check(dist, T)
        if not comp.complete:
            return BasuReport(PRECONDITION_FAILED, math.nan, f"{T.name} is not shown complete",
                              {"completeness": comp.verdict})
    worst = _joint_deviation(dist, T, A, grid)
    exact = _joint_exact(dist, T, A) if dist.is_exact else None
    ok = worst <= tol if exact is None else exact
    return BasuReport(INDEPENDENT if ok else DEPENDENT, worst, details={"exact": exact})


def basu_gaussian_mc(
    dist: GaussianDeformed,
    *,
    m: int = 100_000,
    seed: int = 20240611,
    T: Callable[[np.ndarray], np.ndarray] | None = None,
    A: Callable[[np.ndarray], np.ndarray] | None = None,
) -> BasuReport:
    """Monte Carlo independence check on the Gaussian deformed instance.

    Defaults are ``T = Ybar`` and ``A = Y1 - Y2``. Both are standardized and
    passed through bounded transforms (``tanh`` and ``tanh^2``); every
    cross-correlation must lie within ``3/sqrt(m)``.
    """
    if dist.n < 2:
        raise UnsupportedInstanceError("need n >= 2 for A = Y1 - Y2")
    rng = np.random.default_rng(seed)
    draws = dist.sample(rng, m)
    t = draws.mean(axis=1) if T is None else T(draws)
    a = draws[:, 0] - draws[:, 1] if A is None else A(draws)
    zt = (t - t.mean()) / t.std()
    za = (a - a.mean()) / a.std()
    transforms = {"tanh": np.tanh, "tanh2": lambda z: np.tanh(z) ** 2}
    corrs = {}
    for (nt, ft), (na, fa) in itertools.product(transforms.items(), repeat=2):
        corrs[f"{nt}:{na}"] = float(np.corrcoef(ft(zt), fa(za))[0, 1])
    bound = 3.0 / math.sqrt(m)
    worst = max(abs(c) for c in corrs.values())
    status = INDEPENDENT if worst <= bound else DEPENDENT
    return BasuReport(status, worst, details={"bound": bound, "m": m, "seed": seed, "correlations": corrs})


def _binary_statistics(space: list[tuple], limit: int = 8):
    """All non-constant 0/1 statistics on a space of at most ``limit`` points (one per complement pair)."""
    if len(space) > limit:
        return []
    stats = []
    for mask in range(1, 2 ** (len(space) - 1)):
        table = {y: (mask >> i) & 1 for i, y in enumerate(space)}
        stats.append(Statistic(f"binary:{mask}", table.__getitem__))
    return stats


def find_basu_pairs(dist: FiniteDeformed, candidates_T: Sequence[Statistic], candidates_A: Sequence[Statistic] = (),
                    *, exhaustive: bool = True, grid=None) -> list[tuple[Statistic, Statistic, BasuReport]]:
    """Search for (complete sufficient T, non-constant ancillary A) pairs and test each.

    With ``exhaustive`` every binary statistic on spaces of up to 8 points is
    tried as ``A``.
    """
    grid = dist.family.grid(9) if grid is None else grid
    complete_T = []
    for T in candidates_T:
        if not sufficiency_check(T, dist.glf, grid, n=dist.n).sufficient:
            continue
        rep = completeness_check(dist, T) if dist.is_exact else completeness_grid_check(dist, T, grid)
        if rep.complete:
            complete_T.append(T)
    pool = list(candidates_A) + (_binary_statistics(dist.space) if exhaustive else [])
    ancillary = []
    for A in pool:
        if len(set(A(y) for y in dist.space)) < 2:
            continue
        if ancillarity_check(dist, A, grid).ancillary:
            ancillary.append(A)
    out = []
    for T in complete_T:
        for A in ancillary:
            out.append((T, A, basu_independence_test(dist, T, A, grid=grid, check_preconditions=False)))
    return out


# ---------------------------------------------------------------------------
# UMVUE characterization


@dataclass
class OrthogonalityReport:
    umvue: bool
    statistic: str
    kernel_dim: int
    kernel_basis: list
    violating: list | None = None
    violating_map: dict | None = None
    expectation: sp.Expr | None = None
    basis_expectations: list = field(default_factory=list)

    def to_dict(self):
        return {
            "verdict": "UMVUE" if self.umvue else "NOT_UMVUE",
            "statistic": self.statistic,
            "kernel_dim": self.kernel_dim,
            "kernel_basis": [[_fmt(x) for x in v] for v in self.kernel_basis],
            "violating": None if self.violating is None else [_fmt(x) for x in self.violating],
            "expectation": None if self.expectation is None else str(self.expectation),
        }


def zero_unbiased_basis(dist: FiniteDeformed) -> list[list[Fraction]]:
    """Basis of ``W~0 = {w : E~_lam[w] = 0 for all lam}`` over the sample tuples."""
    if not dist.is_exact:
        raise UnsupportedInstanceError("deformed pmf is not rational in lam")
    matrix, _ = coefficient_matrix(dist.exact_pmf)
    basis = nullspace_exact(matrix, len(dist.space))
    _check_kernel(matrix, len(dist.space), len(basis))
    return basis


def _expect_vec(dist, w, T0):
    return sp.cancel(sp.Add(*[to_sympy(wi * _as_exact(T0(y))) * p
                              for wi, y, p in zip(w, dist.space, dist.exact_pmf)]))


def _as_exact(v):
    return v if isinstance(v, (int, Fraction)) else Fraction(v).limit_denominator(10**12)


def umvue_orthogonality_check(dist: FiniteDeformed, T0: Statistic | Callable) -> OrthogonalityReport:
    """``T0`` is the UMVUE of its expectation iff ``E~[w T0] = 0`` for every ``w`` in ``W~0``.

    When the check fails, the violating direction is the part of ``W~0``
    orthogonal (Euclidean) to the subspace of ``w`` with ``E~[w T0] = 0``,
    scaled so its first nonzero entry is 1.
    """
    name = getattr(T0, "name", "estimator")
    basis = zero_unbiased_basis(dist)
    exps = [_expect_vec(dist, w, T0) for w in basis]
    if all(e == 0 for e in exps):
        return OrthogonalityReport(True, name, len(basis), [integer_normalize(v) for v in basis],
                                   basis_expectations=exps)
    # K0 = {sum c_i k_i : sum c_i e_i == 0}
    coeff, _ = coefficient_matrix(exps)
    c_basis = nullspace_exact(coeff, len(basis))
    k0 = [[sum(c[i] * basis[i][j] for i in range(len(basis))) for j in range(len(dist.space))] for c in c_basis]
    # c with (K c) orthogonal to every k0 vector
    gram = [[sum(a * b for a, b in zip(v, basis[i])) for i in range(len(basis))] for v in k0]
    c_perp = nullspace_exact(gram, len(basis))[0]
    w = [sum(c_perp[i] * basis[i][j] for i in range(len(basis))) for j in range(len(dist.space))]
    lead = next(x for x in w if x != 0)
    w = [x / lead for x in w]
    expectation = sp.factor(_expect_vec(dist, w, T0))
    return OrthogonalityReport(
        False,
        name,
        len(basis),
        [integer_normalize(v) for v in basis],
        violating=w,
        violating_map=dict(zip(dist.space, w)),
        expectation=expectation,
        basis_expectations=exps,
    )


def solve_unbiased(dist: FiniteDeformed, T: Statistic, target) -> tuple[dict, list[dict]]:
    """All ``h`` with ``E~_lam[h(T)] = target(lam)``: a particular solution and a kernel basis.

    ``target`` is a sympy expression in ``LAM`` (or a number). Raises
    ``UnsupportedInstanceError`` when no unbiased function of ``T`` exists.
    """
    pmf = dist.statistic_pmf(T)
    values = pmf.values
    exprs = [pmf.exact[t] for t in values] + [-sp.sympify(target)]
    matrix, _ = coefficient_matrix(exprs)
    reduced, pivots = row_echelon(matrix)
    last = len(values)
    if last in pivots:
        raise UnsupportedInstanceError(f"target has no unbiased estimator based on {T.name}")
    h = [Fraction(0)] * last
    for row, pc in zip(reduced, pivots):
        h[pc] = -row[last]
    kernel = nullspace_exact([row[:last] for row in matrix], last)
    return dict(zip(values, h)), [dict(zip(values, v)) for v in kernel]
