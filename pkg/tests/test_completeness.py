import itertools
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from divgen.completeness import (
    COMPLETE,
    DEPENDENT,
    INCOMPLETE,
    INCONCLUSIVE,
    INDEPENDENT,
    PRECONDITION_FAILED,
    ancillarity_check,
    basu_gaussian_mc,
    basu_independence_test,
    coefficient_matrix,
    completeness_check,
    completeness_grid_check,
    find_basu_pairs,
    solve_unbiased,
    umvue_orthogonality_check,
    verify_witness,
    zero_unbiased_basis,
)
from divgen.deformed import GaussianDeformed, build_deformed_finite
from divgen.errors import UnsupportedInstanceError
from divgen.families import LAM
from divgen.glf import (
    GeneralizedLikelihood,
    Statistic,
    coordinate_statistic,
    identity_statistic,
    mean_statistic,
    minimal_sufficiency_check,
    sufficiency_check,
    sum_statistic,
)

from conftest import LAMBDA_GRID

differ = Statistic("differ", lambda y: int(y[0] != y[1]))


def bern(lam, y):
    return lam if y == 1 else 1 - lam


def ldpd_oracle(lam, n):
    return {y: sum(bern(lam, v) for v in y) / n / 2 ** (n - 1) for y in itertools.product((0, 1), repeat=n)}


class TestCoefficientMatrix:
    def test_small(self):
        matrix, den = coefficient_matrix([(1 - LAM) / 4, LAM / 4, sp.Rational(1, 2)])
        assert den == 4
        assert matrix == [[1, 0, 2], [-1, 1, 0]]

    def test_rational_denominators(self):
        exprs = [LAM / (1 + LAM), 1 / (1 + LAM)]
        matrix, den = coefficient_matrix(exprs)
        assert sp.simplify(den - (1 + LAM)) == 0
        assert matrix == [[0, 1], [1, 0]]

    def test_not_rational(self):
        with pytest.raises(UnsupportedInstanceError):
            coefficient_matrix([sp.exp(LAM)])


class TestCompleteness:
    def test_ldpd_mean_incomplete(self, ex52):
        rep = completeness_check(ex52, mean_statistic)
        assert rep.verdict == INCOMPLETE and not rep.complete
        assert rep.witness_vector == [0, 1, -2, 3]
        assert rep.kernel_dim == 2 and rep.float_kernel_dim == 2
        assert rep.certificate is not None

    def test_witness_against_oracle(self, ex52):
        rep = completeness_check(ex52, mean_statistic)
        for lam in LAMBDA_GRID + [Fraction(1, 7), Fraction(97, 100)]:
            oracle = ldpd_oracle(lam, 3)
            assert sum(p * rep.witness[mean_statistic(y)] for y, p in oracle.items()) == 0
        nonzero = [y for y in ex52.space if rep.witness[mean_statistic(y)] != 0]
        assert sum(ldpd_oracle(Fraction(1, 2), 3)[y] for y in nonzero) > 0

    def test_every_kernel_vector_works(self, ex52):
        rep = completeness_check(ex52, mean_statistic)
        g = ex52.statistic_pmf(mean_statistic)
        for vec in rep.kernel_basis:
            expr = sum(c * g.exact[t] for c, t in zip(vec, rep.values))
            assert sp.simplify(expr) == 0

    @pytest.mark.parametrize("scale", [Fraction(-1), Fraction(5, 3), Fraction(1, 1000)])
    def test_witness_scaling(self, ex52, scale):
        rep = completeness_check(ex52, mean_statistic)
        h = {t: scale * v for t, v in rep.witness.items()}
        assert verify_witness(ex52, mean_statistic, h)

    def test_zero_is_not_a_witness(self, ex52):
        assert not verify_witness(ex52, mean_statistic, {t: 0 for t in (0, Fraction(1, 3), Fraction(2, 3), 1)})

    @pytest.mark.parametrize("T", [sum_statistic, mean_statistic])
    def test_bernoulli_complete(self, bern3, T):
        rep = completeness_check(bern3, T)
        assert rep.verdict == COMPLETE and rep.kernel_dim == 0 and rep.witness is None

    def test_identity_incomplete(self, bern3):
        rep = completeness_check(bern3, identity_statistic)
        assert rep.verdict == INCOMPLETE and rep.kernel_dim == 8 - 4

    def test_grid_agrees(self, ex52, bern3):
        assert completeness_grid_check(bern3, sum_statistic).verdict == COMPLETE
        grid = completeness_grid_check(ex52, mean_statistic)
        assert grid.verdict == INCONCLUSIVE and grid.kernel_dim == 2

    def test_non_rational_instance(self, balpha):
        dist = build_deformed_finite(balpha, GeneralizedLikelihood("dpd", balpha), 2)
        with pytest.raises(UnsupportedInstanceError, match="--method grid"):
            completeness_check(dist, mean_statistic)
        assert completeness_grid_check(dist, mean_statistic).verdict in (COMPLETE, INCONCLUSIVE)

    def test_to_dict(self, ex52):
        d = completeness_check(ex52, mean_statistic).to_dict()
        assert d["verdict"] == INCOMPLETE and d["witness"] == [0, 1, -2, 3]

    def test_complete_sufficient_is_minimal(self, ex52, bern3, malpha):
        cands = [mean_statistic, sum_statistic, identity_statistic, coordinate_statistic(0)]
        grid = [float(x) for x in LAMBDA_GRID]
        seen = 0
        for dist in (ex52, bern3):
            for T in cands:
                if not sufficiency_check(T, dist.glf, grid, n=dist.n).sufficient:
                    continue
                if completeness_check(dist, T).complete:
                    seen += 1
                    assert minimal_sufficiency_check(T, dist.glf, grid, n=dist.n)
        assert seen >= 2


class TestAncillarity:
    def test_ldpd_differ(self, ex53):
        rep = ancillarity_check(ex53, differ)
        assert rep.ancillary and rep.max_variation < 1e-15
        assert rep.pmf[1] == sp.Rational(1, 2)

    def test_classical_differ(self, bern2):
        rep = ancillarity_check(bern2, differ)
        assert not rep.ancillary and rep.max_variation > 0.1


class TestBasu:
    def test_precondition_ancillarity(self, bern2):
        rep = basu_independence_test(bern2, sum_statistic, differ)
        assert rep.status == PRECONDITION_FAILED and "ancillary" in rep.reason

    def test_precondition_completeness(self, ex53):
        rep = basu_independence_test(ex53, mean_statistic, differ)
        assert rep.status == PRECONDITION_FAILED and "complete" in rep.reason

    def test_four_point(self, four_point):
        T = Statistic("high", lambda y: int(y[0] >= 2))
        A = Statistic("odd", lambda y: y[0] % 2)
        rep = basu_independence_test(four_point, T, A)
        assert rep.status == INDEPENDENT and rep.details["exact"] is True

    def test_dependent_without_preconditions(self, bern2):
        rep = basu_independence_test(bern2, sum_statistic, coordinate_statistic(0), check_preconditions=False)
        assert rep.status == DEPENDENT and rep.max_deviation > 0.01

    def test_every_found_pair_is_independent(self, four_point):
        pairs = find_basu_pairs(four_point, [identity_statistic, Statistic("high", lambda y: int(y[0] >= 2))])
        assert pairs
        for _, _, rep in pairs:
            assert rep.status == INDEPENDENT

    def test_gaussian_mc(self):
        dist = GaussianDeformed(0.4, 0.95, 5)
        rep = basu_gaussian_mc(dist, m=100_000, seed=3)
        assert rep.status == INDEPENDENT
        assert rep.max_deviation <= rep.details["bound"]
        assert basu_gaussian_mc(dist, m=100_000, seed=3).details == rep.details

    def test_gaussian_mc_detects_dependence(self):
        dist = GaussianDeformed(0.0, 1.0, 3)
        rep = basu_gaussian_mc(dist, m=20_000, seed=1, A=lambda d: d[:, 0])
        assert rep.status == DEPENDENT

    def test_gaussian_needs_two(self):
        with pytest.raises(UnsupportedInstanceError):
            basu_gaussian_mc(GaussianDeformed(0.0, 1.0, 1))


class TestUMVUE:
    def test_classical_mean(self, bern3):
        rep = umvue_orthogonality_check(bern3, mean_statistic)
        assert rep.umvue and rep.kernel_dim == 4

    def test_lehmann_scheffe(self, bern3):
        rb = bern3.rao_blackwellize(lambda y: y[0], sum_statistic)
        for y in bern3.space:
            assert rb(y) == mean_statistic(y)

    def test_beats_random_competitors(self, bern3):
        rng = np.random.default_rng(7)
        basis = zero_unbiased_basis(bern3)
        for _ in range(20):
            coef = [Fraction(int(c), 4) for c in rng.integers(-8, 9, size=len(basis))]
            w = {y: sum(c * b[i] for c, b in zip(coef, basis)) for i, y in enumerate(bern3.space)}
            comp = lambda y, w=w: y[0] + w[y]  # noqa: E731
            for lam in LAMBDA_GRID:
                assert bern3.expectation(comp, lam) == lam
                assert bern3.variance(mean_statistic, lam) <= bern3.variance(comp, lam)

    def test_ldpd_mean_not_umvue(self, ex53):
        rep = umvue_orthogonality_check(ex53, mean_statistic)
        assert not rep.umvue
        assert rep.violating == [1, -1, -1, 1]
        assert sp.simplify(rep.expectation - (2 * LAM - 1) / 4) == 0
        eta = rep.violating_map
        for lam in (Fraction(1, 5), Fraction(2, 3)):
            oracle = ldpd_oracle(lam, 2)
            assert sum(p * eta[y] for y, p in oracle.items()) == 0
            assert sum(p * eta[y] * mean_statistic(y) for y, p in oracle.items()) == (2 * lam - 1) / 4


class TestSolveUnbiased:
    def test_classical(self, bern3):
        h, kernel = solve_unbiased(bern3, sum_statistic, LAM)
        assert h == {t: Fraction(t, 3) for t in range(4)} and kernel == []
        h2, _ = solve_unbiased(bern3, sum_statistic, LAM**2)
        assert h2 == {t: Fraction(t * (t - 1), 6) for t in range(4)}

    def test_ldpd_family_of_solutions(self, ex52):
        h, kernel = solve_unbiased(ex52, mean_statistic, LAM)
        assert len(kernel) == 2
        for lam in (Fraction(1, 4), Fraction(4, 5)):
            g = ex52.statistic_pmf(mean_statistic)(lam)
            assert sum(h[t] * p for t, p in g.items()) == lam
            for k in kernel:
                assert sum(k[t] * p for t, p in g.items()) == 0

    def test_unattainable(self, bern):
        dist = build_deformed_finite(bern, GeneralizedLikelihood("log", bern), 1)
        with pytest.raises(UnsupportedInstanceError):
            solve_unbiased(dist, identity_statistic, LAM**2)
