"""Level constants S_k and the two-sided bound on the sample-boundedness constant.

For a level ``[a, b]`` of the partition, ``S`` is the constant ``c`` with

    integral_a^b  lam(e)/e * psi(e / (c * lam(e))) de = 1,
    lam(e) = (eta^-1(e) / r)^n,

which is the normalised volume of an interior ball of d-radius ``e``. At the
terminal level (``a = 0``) the equation becomes "smallest c with integral
<= 1", and the integral may diverge for every c.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import BracketFailure, DimensionMismatch
from .geometry import Modulus, NormSpace
from .numerics import bisect_monotone, dyadic_limit, expand_down, expand_up, integrate
from .orlicz import OrliczFunction, inverse
from .partition import I, Partition

QUAD_TOL = 1e-9
ROOT_TOL = 1e-10
MAX_DOUBLINGS = 1000
DIVERGENCE_PROBES = 40
TAIL_WINDOW = 10
RATIO_TOL = 1e-6


def lower_constant(n: int) -> float:
    """The constant ``3(n + 2)`` in ``sum_k S_k <= 3(n+2) S(T, d, phi)``."""
    return 3.0 * (n + 2)


@dataclass(frozen=True)
class LevelIntegrand:
    """``e -> lam(e)/e * psi(e / (c lam(e)))`` on ``(lower, upper]``."""

    space: NormSpace
    modulus: Modulus
    psi: OrliczFunction
    lower: float
    upper: float
    k: int | None = None

    def lam(self, eps):
        return (np.asarray(self.modulus.inverse(eps), dtype=float) / self.space.r) ** self.space.n

    def __call__(self, eps, c: float):
        eps = np.asarray(eps, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            lam = self.lam(eps)
            return lam / eps * np.asarray(self.psi(eps / (c * lam)), dtype=float)

    def at(self, c: float):
        return lambda eps: self(eps, c)

    def integral(self, c: float, quad_tol: float = QUAD_TOL) -> float:
        if self.lower > 0:
            return integrate(self.at(c), self.lower, self.upper, rtol=quad_tol).value
        return dyadic_limit(self.at(c), self.upper, rtol=quad_tol,
                            window=TAIL_WINDOW, ratio_tol=RATIO_TOL).value


class LevelSolution(NamedTuple):
    value: float
    residual: float


def level_lower_bound(space: NormSpace, modulus: Modulus, phi: OrliczFunction, rk: float) -> float:
    """``(1/4) r_k phi^-1(2 r^n / eta^-1(r_k)^n)``, a lower bound for every level."""
    lam = (float(modulus.inverse(rk)) / space.r) ** space.n
    return 0.25 * rk * inverse(phi, 2.0 / lam)


def level_upper_bound(space: NormSpace, modulus: Modulus, phi: OrliczFunction, rk1: float) -> float:
    """``r_{k+1} phi^-1(r^n / eta^-1(r_{k+1})^n)``, an upper bound on halving levels."""
    lam = (float(modulus.inverse(rk1)) / space.r) ** space.n
    return rk1 * inverse(phi, 1.0 / lam)


def _solve(integrand: LevelIntegrand, phi: OrliczFunction, quad_tol: float,
           root_tol: float) -> LevelSolution:
    space, modulus = integrand.space, integrand.modulus

    def below_one(c):
        val = integrand.integral(c, quad_tol)
        return math.isfinite(val) and val <= 1.0

    lo = level_lower_bound(space, modulus, phi, integrand.upper)
    if below_one(lo):
        lo, _ = expand_down(below_one, lo, floor=1e-300, error=BracketFailure)
    start = lo
    if integrand.lower > 0:
        start = max(lo, level_upper_bound(space, modulus, phi, integrand.lower))
    prev, hi = expand_up(below_one, start, limit=math.inf, max_steps=MAX_DOUBLINGS,
                         error=BracketFailure)
    if hi > start:
        lo = max(lo, prev)
    lo, hi = bisect_monotone(below_one, lo, hi, rtol=root_tol)
    value = hi
    return LevelSolution(value, integrand.integral(value, quad_tol) - 1.0)


def _integrand(space, modulus, phi, lower, upper, k=None) -> LevelIntegrand:
    return LevelIntegrand(space, modulus, phi.conjugate, lower, upper, k)


def solve_level(space: NormSpace, modulus: Modulus, phi: OrliczFunction, partition: Partition,
                k: int, quad_tol: float = QUAD_TOL, root_tol: float = ROOT_TOL) -> LevelSolution:
    """Solve for ``S_k`` on an interior level (``r_{k+1} > 0``)."""
    lower, upper = partition.bounds(k)
    if not lower > 0:
        raise ValueError(f"level {k} is terminal; use solve_terminal")
    return _solve(_integrand(space, modulus, phi, lower, upper, k), phi, quad_tol, root_tol)


def solve_cutoff(space: NormSpace, modulus: Modulus, phi: OrliczFunction, partition: Partition,
                 delta: float, quad_tol: float = QUAD_TOL, root_tol: float = ROOT_TOL) -> LevelSolution:
    """``S_m(delta)``: the terminal level equation restricted to ``[delta, r_m]``.

    Finite for every ``delta > 0`` and nondecreasing as ``delta`` shrinks; it
    grows without bound exactly when ``S_m`` is infinite.
    """
    if partition.terminal_m is None:
        raise ValueError("partition has no terminal level")
    rm = partition.radii[partition.terminal_m]
    if not 0 < delta < rm:
        raise ValueError("cutoff must lie in (0, r_m)")
    return _solve(_integrand(space, modulus, phi, delta, rm, partition.terminal_m),
                  phi, quad_tol, root_tol)


class TerminalSolution(NamedTuple):
    value: float
    finite: bool


def solve_terminal(space: NormSpace, modulus: Modulus, phi: OrliczFunction, partition: Partition,
                   quad_tol: float = QUAD_TOL, root_tol: float = ROOT_TOL) -> TerminalSolution:
    """``S_m = inf{c : integral_0^{r_m} ... <= 1}`` via dyadic limits.

    Returns ``(inf, False)`` when the dyadic tail test certifies divergence
    at every probe ``c = c_0 2^i``, i = 0..40, with ``c_0`` the level's
    lower bracket.
    """
    if partition.terminal_m is None:
        raise ValueError("partition has no terminal level")
    rm = partition.radii[partition.terminal_m]
    integrand = _integrand(space, modulus, phi, 0.0, rm, partition.terminal_m)
    c0 = level_lower_bound(space, modulus, phi, rm)
    for i in range(DIVERGENCE_PROBES, -1, -1):
        res = dyadic_limit(integrand.at(c0 * 2.0 ** i), rm, rtol=quad_tol,
                           window=TAIL_WINDOW, ratio_tol=RATIO_TOL)
        if not res.diverged:
            break
    else:
        return TerminalSolution(math.inf, False)
    sol = _solve(integrand, phi, quad_tol, root_tol)
    return TerminalSolution(sol.value, True)


def level_bracket(space: NormSpace, modulus: Modulus, phi: OrliczFunction, partition: Partition,
                   k: int) -> tuple[float, float | None]:
    """Closed-form bracket around ``S_k``: lower always, upper on halving levels."""
    lower, upper = partition.bounds(k)
    lo = level_lower_bound(space, modulus, phi, upper)
    hi = None
    if partition.labels[k] == I and lower > 0:
        hi = level_upper_bound(space, modulus, phi, lower)
    return lo, hi


@dataclass
class BoundsReport:
    n: int
    radii: tuple[float, ...]
    labels: tuple[str, ...]
    s_values: list[float]
    residuals: list[float]
    brackets: list[tuple[float, float | None]]
    partial_sum: float
    tail_bound: float
    finite: bool
    truncated: bool
    terminal_m: int | None
    lower_constant: float = field(init=False)

    def __post_init__(self):
        self.lower_constant = lower_constant(self.n)

    @property
    def sum(self) -> float:
        return self.partial_sum if self.finite else math.inf

    @property
    def lower_bound(self) -> float:
        """``sum / 3(n+2)``: a lower bound on ``S(T, d, phi)``."""
        return self.sum / self.lower_constant

    def rows(self):
        for k, (s, res, (lo, hi)) in enumerate(zip(self.s_values, self.residuals, self.brackets)):
            yield k, self.radii[k], self.labels[k], s, res, lo, hi

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "r_k", "label", "S_k", "residual", "bracket_lo", "bracket_hi"])
        for k, rk, lab, s, res, lo, hi in self.rows():
            w.writerow([k, _fmt(rk), lab, _fmt(s), _fmt(res), _fmt(lo),
                        "" if hi is None else _fmt(hi)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "sum": _jnum(self.sum),
            "partial_sum": _jnum(self.partial_sum),
            "lower_bound": _jnum(self.lower_bound),
            "lower_constant": self.lower_constant,
            "finite": self.finite,
            "tail_bound": _jnum(self.tail_bound),
            "levels": len(self.s_values),
            "terminal_m": self.terminal_m,
            "truncated": self.truncated,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _jnum(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "nan")


def tail_estimate(space: NormSpace, modulus: Modulus, phi: OrliczFunction,
                  partition: Partition) -> float:
    """Geometric extrapolation of the halving-level upper values past truncation.

    Uses ``U(e) = e phi^-1(r^n / eta^-1(e)^n)`` at the built radii; returns
    ``inf`` when the last ratios fail to drop below ``1 - 1e-6``.
    """
    radii = [x for x in partition.radii if x > 0]
    u = [level_upper_bound(space, modulus, phi, x) for x in radii]
    ratios = [b / a for a, b in zip(u[:-1], u[1:])][-TAIL_WINDOW:]
    if not ratios:
        return math.inf
    rho = max(ratios)
    if not rho < 1.0 - RATIO_TOL:
        return math.inf
    return u[-1] * rho / (1.0 - rho)


def total_bound(space: NormSpace, modulus: Modulus, phi: OrliczFunction, partition: Partition,
                quad_tol: float = QUAD_TOL, root_tol: float = ROOT_TOL,
                jobs: int = 1) -> BoundsReport:
    """Solve every level and assemble the envelope ``sum_k S_k``.

    The lower side ``sum / 3(n+2) <= S(T, d, phi)`` is explicit; the upper side
    is reported only as the scale ``sum_k S_k`` (its constant is not known in
    closed form).
    """
    if partition.n != space.n or partition.r != space.r:
        raise DimensionMismatch("partition was built for a different space")

    def one(k):
        if partition.is_terminal(k):
            s, _ = solve_terminal(space, modulus, phi, partition, quad_tol, root_tol)
            if not math.isfinite(s):
                return s, math.nan
            lower, upper = partition.bounds(k)
            res = _integrand(space, modulus, phi, lower, upper, k).integral(s, quad_tol) - 1.0
            return s, res
        return tuple(solve_level(space, modulus, phi, partition, k, quad_tol, root_tol))

    ks = range(partition.levels)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            solved = list(pool.map(one, ks))
    else:
        solved = [one(k) for k in ks]
    s_values = [s for s, _ in solved]
    residuals = [r for _, r in solved]
    brackets = [level_bracket(space, modulus, phi, partition, k) for k in ks]

    tail = tail_estimate(space, modulus, phi, partition) if partition.truncated else 0.0
    partial = math.fsum(s_values)
    finite = math.isfinite(partial) and math.isfinite(tail)
    return BoundsReport(space.n, partition.radii, partition.labels, s_values, residuals, brackets,
                        partial, tail, finite, partition.truncated, partition.terminal_m)


def embedding_integral(space: NormSpace, phi: OrliczFunction, A: float,
                       quad_tol: float = QUAD_TOL) -> float:
    """``integral_0^r psi(1 / (A e^{n-1})) e^{n-1} de``; ``inf`` when certified divergent."""
    psi = phi.conjugate
    n = space.n

    def f(eps):
        eps = np.asarray(eps, dtype=float)
        w = eps ** (n - 1)
        with np.errstate(over="ignore", divide="ignore"):
            return np.asarray(psi(1.0 / (A * w)), dtype=float) * w

    if n == 1:
        return space.r * float(psi(1.0 / A))
    return dyadic_limit(f, space.r, rtol=quad_tol, window=TAIL_WINDOW,
                        ratio_tol=RATIO_TOL).value


def embedding_criterion(space: NormSpace, phi: OrliczFunction, A_probes: Sequence[float]) -> bool:
    """Whether some probe ``A`` makes the embedding integral finite."""
    if len(A_probes) == 0:
        raise ValueError("need at least one probe")
    return any(math.isfinite(embedding_integral(space, phi, a)) for a in A_probes)


def one_dim_profile(modulus: Modulus, phi: OrliczFunction, partition: Partition) -> list[float]:
    """``r_k phi^-1(r / eta^-1(r_k))`` per level, for ``n = 1``."""
    if partition.n != 1:
        raise DimensionMismatch("the one-dimensional profile needs n = 1")
    out = []
    for k in range(partition.levels):
        rk = partition.radii[k]
        out.append(rk * inverse(phi, partition.r / float(modulus.inverse(rk))))
    return out
