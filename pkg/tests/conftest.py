import itertools
import math
from fractions import Fraction

import pytest

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def sigma_exact(k, kappa):
    """Brute-force subset enumeration in exact rationals."""
    if k == -1:
        return Fraction(0)
    vals = [Fraction(x) for x in kappa]
    return sum((math.prod(c) for c in itertools.combinations(vals, k)), Fraction(0))


def p_exact(k, kappa):
    return sigma_exact(k, kappa) / math.comb(len(kappa), k)


def refined_exact(kappa):
    p = [p_exact(k, kappa) for k in range(6)]
    return (p[5] * p[3] / p[4] - p[4]) + 2 * (p[2] - p[3] ** 2 / p[4]) + (p[1] * p[3] / p[4] - 1)


@pytest.fixture
def exact():
    return {"sigma": sigma_exact, "p": p_exact, "refined": refined_exact}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
