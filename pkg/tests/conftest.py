from fractions import Fraction

import pytest

from divgen.deformed import build_deformed_finite
from divgen.families import (
    make_bernoulli_balpha,
    make_bernoulli_exponential,
    make_bernoulli_malpha,
    make_finite_family,
    make_student_balpha,
)
from divgen.glf import GeneralizedLikelihood

LAMBDA_GRID = [Fraction(k, 10) for k in range(1, 10)]


@pytest.fixture(scope="session")
def malpha():
    return make_bernoulli_malpha()


@pytest.fixture(scope="session")
def balpha():
    return make_bernoulli_balpha()


@pytest.fixture(scope="session")
def bern():
    return make_bernoulli_exponential()


@pytest.fixture(scope="session")
def student3():
    return make_student_balpha(3)


@pytest.fixture(scope="session")
def ex52(malpha):
    """Bernoulli M^(2), LDPD likelihood, n = 3."""
    return build_deformed_finite(malpha, GeneralizedLikelihood("ldpd", malpha), 3)


@pytest.fixture(scope="session")
def ex53(malpha):
    """Bernoulli M^(2), LDPD likelihood, n = 2."""
    return build_deformed_finite(malpha, GeneralizedLikelihood("ldpd", malpha), 2)


@pytest.fixture(scope="session")
def bern3(bern):
    """Classical Bernoulli, log-likelihood, n = 3."""
    return build_deformed_finite(bern, GeneralizedLikelihood("log", bern), 3)


@pytest.fixture(scope="session")
def bern2(bern):
    return build_deformed_finite(bern, GeneralizedLikelihood("log", bern), 2)


@pytest.fixture(scope="session")
def four_point():
    """Four-point family whose pmf of 1{y >= 2} carries all the lam-dependence."""
    fam = make_finite_family(
        "four-point", [(0, "lam/2"), (1, "lam/2"), (2, "(1-lam)/2"), (3, "(1-lam)/2")]
    )
    return build_deformed_finite(fam, GeneralizedLikelihood("log", fam), 1)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
