import json
import math

import numpy as np
import pytest

from orlicz_bounds.bounds import (level_bracket, embedding_criterion, embedding_integral,
                                  lower_constant, one_dim_profile, solve_cutoff, solve_level,
                                  total_bound)
from orlicz_bounds.errors import DimensionMismatch
from orlicz_bounds.geometry import Modulus, NormSpace
from orlicz_bounds.orlicz import conjugate_exponent, power
from orlicz_bounds.partition import I, build_partition


def power_level_oracle(n, alpha, p, a, b, r=1.0):
    """S for psi = x^q/q and eta = x^alpha on [a, b], by direct integration of
    e^beta with beta = (q - 1)(1 - n/alpha)."""
    q = conjugate_exponent(p)
    beta = (q - 1.0) * (1.0 - n / alpha)
    if beta == -1.0:
        integral = math.log(b / a)
    else:
        integral = (b ** (beta + 1) - a ** (beta + 1)) / (beta + 1)
    return ((1.0 / q) * r ** (n * (q - 1)) * integral) ** (1.0 / q)


def run(n, alpha, p, norm=math.inf, r=1.0, **kw):
    space = NormSpace.lp(n, norm, r)
    m = Modulus.power(alpha)
    part = build_partition(space, m, **kw)
    return space, m, part, total_bound(space, m, power(p), part)


@pytest.mark.parametrize("n, alpha, p", [(1, 0.5, 3.0), (2, 2 / 3, 3.0), (1, 1 / 3, 6.0),
                                         (3, 0.5, 1.5), (2, 0.5, 2.0)])
def test_interior_levels_match_power_oracle(n, alpha, p):
    space, m, part, rep = run(n, alpha, p, k_max=12)
    for k, s in enumerate(rep.s_values):
        lo, hi = part.bounds(k)
        assert s == pytest.approx(power_level_oracle(n, alpha, p, lo, hi), rel=1e-8)
        assert abs(rep.residuals[k]) < 1e-7


def test_radius_enters_oracle():
    space, m, part, rep = run(2, 0.5, 3.0, r=2.5, k_max=6)
    for k, s in enumerate(rep.s_values):
        lo, hi = part.bounds(k)
        assert s == pytest.approx(power_level_oracle(2, 0.5, 3.0, lo, hi, r=2.5), rel=1e-8)


@pytest.mark.parametrize("n, p, expected", [
    (1, 2.0, 1 / math.sqrt(2)),
    (2, 3.0, (4 / 3) ** (2 / 3)),
    (3, 6.0, None),
])
def test_terminal_oracles(n, p, expected):
    *_, rep = run(n, 1.0, p)
    if expected is None:
        expected = power_level_oracle(n, 1.0, p, 0.0, 1.0)
    assert rep.finite and rep.terminal_m == 0
    assert rep.s_values[0] == pytest.approx(expected, rel=1e-8)


def test_log_divergent_terminal():
    *_, rep = run(2, 1.0, 2.0)
    assert not rep.finite and math.isinf(rep.s_values[0]) and math.isinf(rep.sum)


def test_cutoff_grows_like_sqrt_log():
    space, m, part, _ = run(2, 1.0, 2.0)
    prev = 0.0
    for delta in (1e-1, 1e-2, 1e-4, 1e-8):
        s = solve_cutoff(space, m, power(2.0), part, delta).value
        assert s == pytest.approx(math.sqrt(0.5 * math.log(1 / delta)), rel=1e-8)
        assert s > prev
        prev = s


def test_brackets_hold():
    for n, alpha, p in [(1, 0.5, 3.0), (2, 2 / 3, 6.0), (3, 1 / 3, 2.0), (2, 1.0, 3.0)]:
        space, m, part, rep = run(n, alpha, p, k_max=20)
        for k, s in enumerate(rep.s_values):
            if not math.isfinite(s):
                continue
            lo, hi = level_bracket(space, m, power(p), part, k)
            assert lo <= s * (1 + 1e-9)
            if part.labels[k] == I and part.radii[k + 1] > 0:
                assert hi is not None and s <= hi * (1 + 1e-9)


def test_finiteness_matches_exponent_rule():
    for n, alpha, p, finite in [(1, 0.5, 3.0, True), (1, 0.5, 2.0, False), (2, 1.0, 3.0, True),
                                (3, 1.0, 3.0, False), (1, 1 / 3, 6.0, True)]:
        *_, rep = run(n, alpha, p)
        assert rep.finite is finite


def test_parallel_matches_serial():
    space = NormSpace.lp(2, 2.0)
    m = Modulus.power(0.5)
    part = build_partition(space, m, k_max=10)
    a = total_bound(space, m, power(6.0), part)
    b = total_bound(space, m, power(6.0), part, jobs=3)
    assert a.to_csv() == b.to_csv()


def test_report_outputs():
    *_, rep = run(2, 1.0, 2.0)
    data = json.loads(rep.to_json())
    assert data["sum"] == "inf" and data["finite"] is False
    assert data["lower_constant"] == 12.0
    *_, rep = run(1, 1.0, 2.0)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "k,r_k,label,S_k,residual,bracket_lo,bracket_hi"
    assert lines[1].startswith("0,1,J,0.7071067811")
    assert rep.lower_bound == pytest.approx(rep.sum / 9)
    assert lower_constant(4) == 18


def test_wrong_space_rejected():
    space = NormSpace.lp(2, 2.0)
    part = build_partition(NormSpace.lp(1, 2.0), Modulus.identity())
    with pytest.raises(DimensionMismatch):
        total_bound(space, Modulus.identity(), power(2.0), part)
    with pytest.raises(ValueError):
        solve_level(space, Modulus.identity(), power(2.0), part, 0)


@pytest.mark.parametrize("n, p, A, expected", [
    (1, 2.0, 2.0, 0.125),            # r psi(1/A)
    (2, 3.0, 1.0, 4 / 3),            # int (2/3) e^-1/2
    (3, 6.0, 1.0, 1 / (1.2 * 0.6)),  # int e^-0.4 / 1.2
    (2, 2.0, 1.0, math.inf),
    (3, 3.0, 1.0, math.inf),
])
def test_embedding_integral(n, p, A, expected):
    val = embedding_integral(NormSpace.lp(n, 2.0), power(p), A)
    assert val == pytest.approx(expected, rel=1e-8)


def test_embedding_criterion():
    assert embedding_criterion(NormSpace.lp(2, 2.0), power(3.0), [0.5, 1.0])
    assert not embedding_criterion(NormSpace.lp(2, 2.0), power(2.0), [0.5, 1.0])
    with pytest.raises(ValueError):
        embedding_criterion(NormSpace.lp(2, 2.0), power(3.0), [])


def test_one_dim_profile_formula_and_guard():
    space = NormSpace.lp(1, math.inf)
    m = Modulus.power(0.5)
    part = build_partition(space, m, k_max=5)
    prof = one_dim_profile(m, power(2.0), part)
    expected = [rk * math.sqrt(2 / rk ** 2) for rk in part.radii[:5]]
    assert np.allclose(prof, expected, rtol=1e-12)
    with pytest.raises(DimensionMismatch):
        one_dim_profile(m, power(2.0), build_partition(NormSpace.lp(2, 2.0), m, k_max=2))
