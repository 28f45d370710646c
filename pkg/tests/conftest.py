import math

import pytest

from orlicz_bounds.geometry import Modulus, NormSpace
from orlicz_bounds.orlicz import OrliczFunction, power

ACCEPTANCE_LINES: list[str] = []


def exp_type() -> OrliczFunction:
    """``e^x - 1 - x``; conjugate ``(1 + y) log(1 + y) - y``. Not in the power family."""
    import numpy as np

    def conj():
        return OrliczFunction(lambda y: (1 + y) * np.log1p(y) - y, lambda y: np.log1p(y),
                              name="exp-conj")

    return OrliczFunction(lambda x: np.expm1(x) - x, lambda x: np.expm1(x),
                          conjugate_factory=conj, name="exp-type")


@pytest.fixture
def exp_phi():
    return exp_type()


@pytest.fixture(params=[1.5, 2.0, 3.0, 6.0], ids=lambda p: f"p{p:g}")
def power_phi(request):
    return power(request.param)


@pytest.fixture
def linf2():
    return NormSpace.lp(2, math.inf)


@pytest.fixture
def identity():
    return Modulus.identity()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
