"""Numerical checks of the Orlicz-Sobolev oscillation inequality

    sup_{s,t in T} |f(s) - f(t)|
        <= 6AB ( int_0^r psi(1 / (A e^{n-1})) e^{n-1} de
                 + (1 / (n |B(0,1)|)) int_T phi(||grad f(u)||_* / B) du )

and of the Hoelder bound it gives for ``phi = x^p / p`` with ``p > n``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .bounds import embedding_integral
from .errors import DivergentTerm1, ExponentOutOfRange
from .geometry import NormSpace, dual_norm, quasi_ball_points, sample_ball_sharded, unit_ball_volume
from .orlicz import OrliczFunction, conjugate_exponent

FAMILIES = ("linear", "radial-smooth", "random-trigonometric", "piecewise-linear")
PROBES = tuple(np.logspace(-1.0, 1.0, 5))
GRAD_STEP = 1e-6
GRAD_RTOL = 1e-4
KINK_SKIP = 1e-3


@dataclass(frozen=True)
class TestFunction:
    """A Lipschitz function on R^n with its (a.e.) gradient.

    ``evaluate`` maps an ``(m, n)`` array to ``(m,)``; ``gradient`` to
    ``(m, n)``. ``kink_distance`` (piecewise families only) returns the
    Euclidean distance to the set where ``f`` is not differentiable.
    """

    __test__ = False  # keep pytest from collecting this class

    tag: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz_hint: float | None = None
    kink_distance: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x):
        return self.evaluate(np.atleast_2d(np.asarray(x, dtype=float)))

    def scaled(self, c: float) -> TestFunction:
        hint = None if self.lipschitz_hint is None else abs(c) * self.lipschitz_hint
        return TestFunction(self.tag, lambda x: c * self.evaluate(x),
                            lambda x: c * self.gradient(x), hint, self.kink_distance)


def linear(a: Sequence[float], space: NormSpace | None = None) -> TestFunction:
    a = np.asarray(a, dtype=float)
    hint = dual_norm(space, a) if space is not None else None
    return TestFunction("linear", lambda x: x @ a,
                        lambda x: np.broadcast_to(a, x.shape).copy(), hint)


def constant(value: float) -> TestFunction:
    return TestFunction("linear", lambda x: np.full(len(x), float(value)),
                        lambda x: np.zeros_like(x), 0.0)


def radial_smooth(n: int, width: float = 0.5) -> TestFunction:
    """``exp(-|u|_2^2 / (2 width^2))``."""
    s2 = width * width

    def f(x):
        return np.exp(-(x * x).sum(axis=-1) / (2.0 * s2))

    def g(x):
        return -x / s2 * f(x)[:, None]

    return TestFunction("radial-smooth", f, g)


def random_trigonometric(n: int, terms: int = 4, seed: int = 0) -> TestFunction:
    """``sum_j c_j sin(<k_j, u> + theta_j)`` with seeded coefficients."""
    rng = np.random.default_rng(seed)
    k = rng.normal(scale=3.0, size=(terms, n))
    c = rng.uniform(-1.0, 1.0, size=terms) / terms
    th = rng.uniform(0.0, 2 * math.pi, size=terms)

    def f(x):
        return np.sin(x @ k.T + th) @ c

    def g(x):
        return (np.cos(x @ k.T + th) * c) @ k

    return TestFunction("random-trigonometric", f, g)


def piecewise_linear(n: int) -> TestFunction:
    """``|u_1 - 0.1| + 0.5 max(u_n + 0.2, 0)``; kinks on two hyperplanes."""
    last = n - 1

    def f(x):
        return np.abs(x[:, 0] - 0.1) + 0.5 * np.maximum(x[:, last] + 0.2, 0.0)

    def g(x):
        out = np.zeros_like(x)
        out[:, 0] = np.sign(x[:, 0] - 0.1)
        out[:, last] += 0.5 * (x[:, last] > -0.2)
        return out

    def kinks(x):
        return np.minimum(np.abs(x[:, 0] - 0.1), np.abs(x[:, last] + 0.2))

    return TestFunction("piecewise-linear", f, g, kink_distance=kinks)


def corpus(space: NormSpace, seed: int = 0) -> list[TestFunction]:
    """One member per family."""
    n = space.n
    a = 0.5 ** np.arange(n)
    return [linear(a, space), radial_smooth(n), random_trigonometric(n, seed=seed),
            piecewise_linear(n)]


def gradient_check(f: TestFunction, space: NormSpace, points: int = 100, seed: int = 0,
                   step: float = GRAD_STEP) -> float:
    """Largest ``|fd - grad| / max(|grad|, 1)`` (Euclidean) over interior points.

    Points within ``1e-3`` of a declared kink are skipped.
    """
    rng = np.random.default_rng(seed)
    pts = sample_ball_sharded(space, 4 * points, rng.integers(2**63))
    pts = pts[space.norm(pts) <= 0.95 * space.r]
    if f.kink_distance is not None:
        pts = pts[f.kink_distance(pts) > KINK_SKIP]
    pts = pts[:points]
    grad = f.gradient(pts)
    fd = np.empty_like(grad)
    for i in range(space.n):
        e = np.zeros(space.n)
        e[i] = step
        fd[:, i] = (f.evaluate(pts + e) - f.evaluate(pts - e)) / (2 * step)
    err = np.linalg.norm(fd - grad, axis=1) / np.maximum(np.linalg.norm(grad, axis=1), 1.0)
    return float(err.max())


@dataclass(frozen=True)
class SobolevCheck:
    tag: str
    A: float
    B: float
    lhs: float
    term1: float
    term2: float
    term2_stderr: float
    rhs: float
    margin: float
    stderr: float
    vacuous: bool = False

    @property
    def holds(self) -> bool:
        return self.vacuous or self.margin >= -1e-6 * self.rhs

    def row(self) -> list[str]:
        return [self.tag] + [_f(v) for v in (self.A, self.B, self.lhs, self.term1, self.term2,
                                            self.rhs, self.margin, self.stderr)]


CSV_HEADER = ["function", "A", "B", "lhs", "term1", "term2", "rhs", "margin", "stderr"]


def _f(x) -> str:
    return format(float(x), ".17g")


def checks_to_csv(checks: Sequence[SobolevCheck]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in checks:
        w.writerow(c.row())
    return buf.getvalue()


class GradientSample:
    """Monte Carlo sample of ``||grad f||_*`` on ``T`` for the gradient integral."""

    def __init__(self, space: NormSpace, f: TestFunction, mc_count: int, seed: int,
                 shards: int = 1):
        if mc_count < 2:
            raise ValueError("mc_count must be >= 2")
        self.space = space
        pts = sample_ball_sharded(space, mc_count, seed, shards)
        self.norms = np.asarray(dual_norm(space, f.gradient(pts)), dtype=float)
        # |T| / (n |B(0,1)|) = r^n / n
        self.scale = space.r ** space.n / space.n

    def term2(self, phi: OrliczFunction, B: float) -> tuple[float, float]:
        vals = np.asarray(phi(self.norms / B), dtype=float)
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        return self.scale * float(vals.mean()), self.scale * float(se)

    def moment(self, p: float) -> tuple[float, float]:
        """``int_T ||grad f||_*^p`` and its standard error."""
        vol = unit_ball_volume(self.space) * self.space.r ** self.space.n
        vals = self.norms ** p
        return vol * float(vals.mean()), vol * float(vals.std(ddof=1) / math.sqrt(len(vals)))


def grid_oscillation(f: TestFunction, space: NormSpace, grid_count: int, seed: int = 0) -> float:
    """``max f - min f`` over a quasi-random grid on ``T``."""
    vals = f.evaluate(quasi_ball_points(space, grid_count, seed))
    return float(vals.max() - vals.min())


class Term1Cache:
    def __init__(self, space: NormSpace, phi: OrliczFunction):
        self.space, self.phi = space, phi
        self._values: dict[float, float] = {}

    def __call__(self, A: float) -> float:
        if A not in self._values:
            self._values[A] = embedding_integral(self.space, self.phi, A)
        return self._values[A]


def _assemble(tag, A, B, lhs, t1, t2, se2) -> SobolevCheck:
    rhs = 6.0 * A * B * (t1 + t2)
    return SobolevCheck(tag, A, B, lhs, t1, t2, se2, rhs, rhs - lhs, 6.0 * A * B * se2)


def check_oscillation_bound(space: NormSpace, phi: OrliczFunction, f: TestFunction, A: float, B: float,
                  grid_count: int, mc_count: int, seed: int, shards: int = 1) -> SobolevCheck:
    """Both sides of the inequality for one ``(A, B)``.

    Raises :class:`DivergentTerm1` when the first integral is certified
    infinite, in which case the inequality says nothing.
    """
    if not (A > 0 and B > 0):
        raise ValueError("A and B must be positive")
    t1 = embedding_integral(space, phi, A)
    if not math.isfinite(t1):
        raise DivergentTerm1(f"first integral diverges for A = {A:g}")
    lhs = grid_oscillation(f, space, grid_count, seed)
    t2, se2 = GradientSample(space, f, mc_count, seed, shards).term2(phi, B)
    return _assemble(f.tag, A, B, lhs, t1, t2, se2)


@dataclass
class CorpusResult:
    checks: list[SobolevCheck] = field(default_factory=list)

    @property
    def violations(self) -> list[SobolevCheck]:
        return [c for c in self.checks if not c.holds]

    @property
    def vacuous(self) -> int:
        return sum(c.vacuous for c in self.checks)

    def to_csv(self) -> str:
        return checks_to_csv(self.checks)


def run_corpus(space: NormSpace, phi: OrliczFunction, functions: Sequence[TestFunction],
               A_values: Sequence[float] = PROBES, B_values: Sequence[float] = PROBES,
               grid_count: int = 4096, mc_count: int = 20000, seed: int = 0, shards: int = 1,
               jobs: int = 1) -> CorpusResult:
    """Every function against every ``(A, B)`` probe.

    The first integral is computed once per ``A`` and each function's grid
    and gradient sample once; probes with a divergent first integral are
    kept as vacuous rows (``rhs = inf``).
    """
    term1 = Term1Cache(space, phi)
    t1 = {A: term1(A) for A in A_values}

    def one(f: TestFunction) -> list[SobolevCheck]:
        lhs = grid_oscillation(f, space, grid_count, seed)
        sample = GradientSample(space, f, mc_count, seed, shards)
        out = []
        for A in A_values:
            for B in B_values:
                t2, se2 = sample.term2(phi, B)
                if math.isfinite(t1[A]):
                    out.append(_assemble(f.tag, A, B, lhs, t1[A], t2, se2))
                else:
                    out.append(SobolevCheck(f.tag, A, B, lhs, math.inf, t2, se2, math.inf,
                                            math.inf, 0.0, vacuous=True))
        return out

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(one, functions))
    else:
        parts = [one(f) for f in functions]
    return CorpusResult([c for part in parts for c in part])


@dataclass(frozen=True)
class HolderCheck:
    max_ratio: float
    bound_constant: float
    relative_stderr: float

    @property
    def holds(self) -> bool:
        return self.max_ratio <= self.bound_constant * (1.0 + 3.0 * self.relative_stderr)


def holder_constant(space: NormSpace, p: float, gradient_moment: float) -> float:
    """``6 ((p-1)/(p-n))^{1-1/p} (n |B(0,1)|)^{-1/p} (int_T ||grad f||_*^p)^{1/p}``."""
    n = space.n
    vol = unit_ball_volume(space)
    return (6.0 * ((p - 1.0) / (p - n)) ** (1.0 - 1.0 / p) / (n * vol) ** (1.0 / p)
            * gradient_moment ** (1.0 / p))


def holder_check(space: NormSpace, f: TestFunction, p: float, grid_count: int, mc_count: int,
                 seed: int, shards: int = 1) -> HolderCheck:
    """Largest ``|f(s) - f(t)| / ||s - t||^{1 - n/p}`` over grid pairs versus the
    Hoelder constant, whose gradient integral is estimated by Monte Carlo."""
    n = space.n
    if not p > n:
        raise ExponentOutOfRange(f"need p > n, got p = {p!r}, n = {n}")
    pts = quasi_ball_points(space, grid_count, seed)
    vals = f.evaluate(pts)
    expo = 1.0 - n / p
    best = 0.0
    for i in range(len(pts) - 1):
        dist = np.asarray(space.norm(pts[i + 1:] - pts[i]), dtype=float)
        ok = dist > 0
        if np.any(ok):
            ratio = np.abs(vals[i + 1:][ok] - vals[i]) / dist[ok] ** expo
            best = max(best, float(ratio.max()))
    moment, se = GradientSample(space, f, mc_count, seed, shards).moment(p)
    rel = (se / moment / p) if moment > 0 else 0.0
    return HolderCheck(best, holder_constant(space, p, moment), rel)


def closed_form_A(space: NormSpace, p: float, radius: float | None = None) -> float:
    """``(int_0^rho e^{(1-q)(n-1)} de)^{1/q}``; ``inf`` unless ``p > n``."""
    rho = space.r if radius is None else radius
    q = conjugate_exponent(p)
    e = (1.0 - q) * (space.n - 1) + 1.0
    if not e > 0:
        return math.inf
    return (rho ** e / e) ** (1.0 / q)


def optimal_AB(space: NormSpace, phi: OrliczFunction, f: TestFunction,
               term2_estimate: Callable[[float], float], radius: float | None = None,
               method: str = "auto") -> tuple[float, float]:
    """``(A, B)`` minimising the right-hand side.

    ``term2_estimate(B)`` returns the gradient term at ``B``. For power
    ``phi`` the closed-form pair is returned; otherwise (or with
    ``method="grid"``) the best of a 9x9 log grid with ratio 2 around a
    power-law heuristic, plus the probe ``(1, 1)``.
    """
    p = phi.power
    if p is not None and method != "grid":
        A = closed_form_A(space, p, radius)
        if not math.isfinite(A):
            raise DivergentTerm1(f"no finite A for p = {p:g} <= n = {space.n}")
        B = (p * term2_estimate(1.0)) ** (1.0 / p)
        return A, B

    if p is None:
        p = float(phi.derivative(1.0)) / float(phi(1.0))
    A0 = closed_form_A(space, p, radius) if p > space.n else 1.0
    B0 = (p * term2_estimate(1.0)) ** (1.0 / p) if term2_estimate(1.0) > 0 else 1.0
    if not math.isfinite(A0):
        A0 = 1.0
    factors = 2.0 ** np.arange(-4, 5)
    probes = [(1.0, 1.0)] + [(A0 * a, B0 * b) for a in factors for b in factors]
    space_r = space if radius is None else replace(space, r=radius)
    best, best_rhs = None, math.inf
    for A, B in probes:
        t1 = embedding_integral(space_r, phi, A)
        if not math.isfinite(t1):
            continue
        rhs = A * B * (t1 + term2_estimate(B))
        if rhs < best_rhs:
            best, best_rhs = (float(A), float(B)), rhs
    if best is None:
        raise DivergentTerm1("no probe A gives a finite first integral")
    return best
