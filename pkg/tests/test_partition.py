import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orlicz_bounds.errors import NonConcaveModulus
from orlicz_bounds.geometry import Modulus, NormSpace
from orlicz_bounds.partition import I, J, build_partition, power_ratio

SPACE = NormSpace.lp(1, math.inf)


@given(st.floats(0.05, 0.95))
@settings(max_examples=40, deadline=None)
def test_power_modulus_closed_form(alpha):
    part = build_partition(SPACE, Modulus.power(alpha))
    ratio = power_ratio(alpha)
    k = np.arange(len(part.radii))
    assert np.allclose(part.radii, ratio ** k, rtol=1e-8, atol=0)
    assert set(part.labels) == ({I} if alpha <= 0.5 else {J})
    assert part.truncated and part.terminal_m is None


def test_linear_modulus_is_terminal_at_zero():
    part = build_partition(SPACE, Modulus.identity())
    assert part.terminal_m == 0 and part.radii == (1.0, 0.0) and not part.truncated


def test_capped_modulus_halves_then_terminates():
    part = build_partition(SPACE, Modulus.capped(0.5, 8.0))
    assert part.radii == (1.0, 0.5, 0.25, 0.125, 0.0)
    assert part.labels == (I, I, I, J) and part.terminal_m == 3


@given(st.floats(0.05, 0.95), st.floats(0.5, 4.0), st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_recursion_invariants(alpha, r, n):
    space = NormSpace.lp(n, 2.0, r=r)
    m = Modulus.power(alpha)
    part = build_partition(space, m)
    radii = np.array(part.radii)
    assert radii[0] == pytest.approx(r ** alpha)
    assert np.all(radii[1:] <= radii[:-1] / 2 * (1 + 1e-12))
    for k, lab in enumerate(part.labels):
        if lab == J:
            assert m.slope_ratio(radii[k + 1]) == pytest.approx(2 * m.slope_ratio(radii[k]), rel=1e-9)


def test_truncation_controls():
    m = Modulus.power(0.5)
    part = build_partition(SPACE, m, k_max=5)
    assert part.levels == 5 and part.truncated
    part = build_partition(SPACE, m, r_min=1e-3)
    assert part.radii[-1] < 1e-3 <= part.radii[-2]
    with pytest.raises(ValueError):
        build_partition(SPACE, m, k_max=0)


def test_convex_modulus_rejected():
    sq = Modulus(lambda x: x * x, lambda y: np.sqrt(y), derivative_at_zero=0.0)
    with pytest.raises(NonConcaveModulus):
        build_partition(SPACE, sq)


def test_csv_layout():
    text = build_partition(SPACE, Modulus.power(0.5), k_max=2).to_csv()
    assert text == "k,r_k,label\n0,1,I\n1,0.5,I\n2,0.25,\n"
