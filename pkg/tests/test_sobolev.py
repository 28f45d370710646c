import math

import numpy as np
import pytest

from orlicz_bounds.errors import DivergentTerm1, ExponentOutOfRange
from orlicz_bounds.geometry import NormSpace
from orlicz_bounds.orlicz import power
from orlicz_bounds.sobolev import (CSV_HEADER, FAMILIES, GradientSample, check_oscillation_bound,
                                   checks_to_csv, closed_form_A, constant, corpus,
                                   gradient_check, grid_oscillation, holder_check, linear,
                                   optimal_AB, run_corpus)

NORMS = [1.0, 2.0, math.inf]


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("p", NORMS)
def test_corpus_gradients(n, p):
    space = NormSpace.lp(n, p)
    fs = corpus(space)
    assert [f.tag for f in fs] == list(FAMILIES)
    for f in fs:
        assert gradient_check(f, space) <= 1e-4, f.tag


def test_linear_desk_example(linf2):
    f = linear([1.0, 0.0], linf2)
    c = check_oscillation_bound(linf2, power(3.0), f, 1.0, 1.0, 2048, 5000, seed=0)
    assert c.term1 == pytest.approx(4 / 3, rel=1e-9)
    assert c.term2 == pytest.approx(1 / 6, rel=1e-12)  # gradient norm is constant
    assert c.rhs == pytest.approx(9.0, rel=1e-9)
    assert 1.99 <= c.lhs <= 2.0 and c.holds


def test_constant_function_has_zero_lhs(linf2):
    c = check_oscillation_bound(linf2, power(3.0), constant(3.0), 0.7, 1.3, 256, 100, seed=1)
    assert c.lhs == 0.0 and c.term2 == 0.0 and c.margin == c.rhs > 0


def test_vacuous_when_first_integral_diverges():
    space = NormSpace.lp(2, 2.0)
    with pytest.raises(DivergentTerm1):
        check_oscillation_bound(space, power(2.0), corpus(space)[0], 1.0, 1.0, 64, 100, seed=0)
    res = run_corpus(NormSpace.lp(3, 2.0), power(3.0), corpus(NormSpace.lp(3, 2.0)),
                     grid_count=256, mc_count=500)
    assert res.vacuous == len(res.checks) and not res.violations


def test_invalid_probe():
    with pytest.raises(ValueError):
        check_oscillation_bound(NormSpace.lp(1, 2.0), power(2.0), constant(0.0), 0.0, 1.0, 8, 8, 0)


def test_scale_coherence(linf2):
    phi = power(3.0)
    for f in corpus(linf2):
        a = check_oscillation_bound(linf2, phi, f, 0.8, 1.5, 512, 4000, seed=2)
        b = check_oscillation_bound(linf2, phi, f.scaled(2.0), 0.8, 3.0, 512, 4000, seed=2)
        assert b.term2 == pytest.approx(a.term2, rel=1e-12)
        assert b.rhs == pytest.approx(2 * a.rhs, rel=1e-12)
        assert b.lhs == pytest.approx(2 * a.lhs, rel=1e-12)


def test_grid_refinement_never_lowers_lhs(linf2):
    for f in corpus(linf2):
        vals = [grid_oscillation(f, linf2, m, seed=4) for m in (64, 256, 1024, 4096)]
        assert all(x <= y for x, y in zip(vals, vals[1:]))


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("norm", NORMS)
def test_theorem_on_probe_grid(n, norm):
    space = NormSpace.lp(n, norm)
    for p in (2.0, 3.0):
        res = run_corpus(space, power(p), corpus(space), grid_count=1024, mc_count=5000)
        assert len(res.checks) == 4 * 25
        assert not res.violations
        for c in res.checks:
            if not c.vacuous:
                assert c.stderr >= 0 and math.isfinite(c.rhs)


def test_corpus_parallel_and_csv():
    space = NormSpace.lp(2, 2.0)
    a = run_corpus(space, power(3.0), corpus(space), grid_count=256, mc_count=1000)
    b = run_corpus(space, power(3.0), corpus(space), grid_count=256, mc_count=1000, jobs=3)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == ",".join(CSV_HEADER)
    assert checks_to_csv([]) == ",".join(CSV_HEADER) + "\n"


def test_holder_desk_example(linf2):
    h = holder_check(linf2, linear([1.0, 0.0], linf2), 3.0, 400, 5000, seed=0)
    assert h.max_ratio <= 2 ** (2 / 3)
    assert h.bound_constant == pytest.approx(6 * 2 ** (1 / 3), rel=1e-12)
    assert h.holds


def test_holder_constant_function_and_range(linf2):
    assert holder_check(linf2, constant(1.0), 3.0, 100, 100, 0).max_ratio == 0.0
    with pytest.raises(ExponentOutOfRange):
        holder_check(linf2, constant(1.0), 2.0, 100, 100, 0)


def test_holder_large_exponent_approaches_lipschitz(linf2):
    f = linear([1.0, 0.0], linf2)
    h = holder_check(linf2, f, 50.0, 400, 1000, seed=0)
    L = f.lipschitz_hint
    assert 0.9 * L <= h.max_ratio <= L * (2 * linf2.r) ** (2 / 50)
    assert h.holds


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("norm", NORMS)
def test_holder_on_corpus(n, norm):
    space = NormSpace.lp(n, norm)
    for p in sorted({n + 1, 2 * n, 5 * n} - {n}):
        for f in corpus(space):
            assert holder_check(space, f, float(p), 300, 5000, seed=1).holds, (p, f.tag)


def test_optimal_pair_power_closed_form(linf2):
    phi = power(3.0)
    f = corpus(linf2)[2]
    sample = GradientSample(linf2, f, 5000, 0)
    t2 = lambda B: sample.term2(phi, B)[0]
    A, B = optimal_AB(linf2, phi, f, t2)
    assert A == pytest.approx(closed_form_A(linf2, 3.0))
    best = check_oscillation_bound(linf2, phi, f, A, B, 256, 5000, seed=0)
    assert best.rhs == pytest.approx(6 * A * B, rel=1e-8)
    Ag, Bg = optimal_AB(linf2, phi, f, t2, method="grid")
    grid = check_oscillation_bound(linf2, phi, f, Ag, Bg, 256, 5000, seed=0)
    one = check_oscillation_bound(linf2, phi, f, 1.0, 1.0, 256, 5000, seed=0)
    assert best.rhs <= grid.rhs * (1 + 1e-9) and grid.rhs <= one.rhs * (1 + 1e-12)


def test_optimal_A_one_dimensional():
    space = NormSpace.lp(1, 2.0)
    assert closed_form_A(space, 2.0, radius=0.49) == pytest.approx(math.sqrt(0.49))
    assert math.isinf(closed_form_A(NormSpace.lp(2, 2.0), 2.0))
    with pytest.raises(DivergentTerm1):
        optimal_AB(NormSpace.lp(2, 2.0), power(2.0), constant(0.0), lambda B: 0.0)


def test_optimal_pair_general_phi(exp_phi):
    space = NormSpace.lp(1, 2.0)
    f = corpus(space)[1]
    sample = GradientSample(space, f, 2000, 0)
    t2 = lambda B: sample.term2(exp_phi, B)[0]
    A, B = optimal_AB(space, exp_phi, f, t2)
    rhs = lambda a, b: a * b * (space.r * float(exp_phi.conjugate(1 / a)) + t2(b))
    assert rhs(A, B) <= rhs(1.0, 1.0)
    assert optimal_AB(space, exp_phi, f, t2) == (A, B)
