"""Adaptive quadrature, monotone bisection and dyadic improper-integral limits.

The integrators take vectorised callables (numpy array in, array out).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BracketFailure, SlowConvergence

ArrayFn = Callable[[np.ndarray], np.ndarray]

# Gauss-Kronrod 7/15 pair (QUADPACK qk15). Kronrod nodes in decreasing order;
# the odd-indexed ones are the 7-point Gauss nodes.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# Full symmetric node/weight vectors on [-1, 1].
KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS_ON_KRONROD = np.zeros(15)
for _i, _w in zip((1, 3, 5), _WG[:3]):
    GAUSS_WEIGHTS_ON_KRONROD[_i] = _w
    GAUSS_WEIGHTS_ON_KRONROD[14 - _i] = _w
GAUSS_WEIGHTS_ON_KRONROD[7] = _WG[3]


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    intervals: int


def gk15(f: ArrayFn, a: float, b: float) -> tuple[float, float]:
    """One Gauss-Kronrod 7/15 panel: (Kronrod estimate, |Kronrod - Gauss|)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    fx = np.asarray(f(mid + half * KRONROD_NODES), dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        k = half * float(KRONROD_WEIGHTS @ fx)
        g = half * float(GAUSS_WEIGHTS_ON_KRONROD @ fx)
    return k, abs(k - g)


def _adaptive(f: ArrayFn, a: float, b: float, rtol: float, atol: float,
              max_intervals: int) -> QuadResult:
    k, e = gk15(f, a, b)
    if not math.isfinite(k):
        return QuadResult(math.inf if k > 0 or math.isnan(k) else -math.inf, math.inf, 1)
    heap = [(-e, a, b, k)]
    total, err = k, e
    n = 1
    while err > max(atol, rtol * abs(total)) and n < max_intervals:
        _, lo, hi, kval = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            # interval below float resolution; keep its estimate and stop refining it
            heapq.heappush(heap, (0.0, lo, hi, kval))
            err = sum(-x[0] for x in heap)
            break
        k1, e1 = gk15(f, lo, mid)
        k2, e2 = gk15(f, mid, hi)
        if not (math.isfinite(k1) and math.isfinite(k2)):
            return QuadResult(math.inf, math.inf, n)
        heapq.heappush(heap, (-e1, lo, mid, k1))
        heapq.heappush(heap, (-e2, mid, hi, k2))
        n += 1
        total = math.fsum(x[3] for x in heap)
        err = math.fsum(-x[0] for x in heap)
    return QuadResult(total, err, n)


def integrate(f: ArrayFn, a: float, b: float, rtol: float = 1e-9, atol: float = 0.0,
              max_intervals: int = 4000, log_scale: bool | None = None) -> QuadResult:
    """Adaptive Gauss-Kronrod integral of ``f`` over ``[a, b]``.

    With ``log_scale`` (default: automatic when ``0 < a < 1e-3 * b``) the
    substitution ``x = b * exp(-u)`` is applied, which flattens integrands
    that vary over many orders of magnitude across the interval.
    """
    if a == b:
        return QuadResult(0.0, 0.0, 0)
    if a > b:
        res = integrate(f, b, a, rtol, atol, max_intervals, log_scale)
        return QuadResult(-res.value, res.error, res.intervals)
    if log_scale is None:
        log_scale = a > 0 and a < 1e-3 * b
    if log_scale:
        if a <= 0:
            raise ValueError("log-scale quadrature needs a positive lower limit")

        def h(u):
            x = b * np.exp(-u)
            return f(x) * x

        return _adaptive(h, 0.0, math.log(b / a), rtol, atol, max_intervals)
    return _adaptive(f, a, b, rtol, atol, max_intervals)


def _midpoint(lo: float, hi: float) -> float:
    if lo > 0 and hi > 4 * lo:
        return math.sqrt(lo) * math.sqrt(hi)
    return 0.5 * (lo + hi)


def bisect_monotone(above: Callable[[float], bool], lo: float, hi: float,
                    rtol: float = 1e-12, max_iter: int = 2000) -> tuple[float, float]:
    """Shrink ``[lo, hi]`` around the switch point of a monotone predicate.

    ``above(x)`` must be False at ``lo`` and True at ``hi``. Returns the final
    ``(lo, hi)`` with ``hi - lo <= rtol * hi``.
    """
    for _ in range(max_iter):
        if hi - lo <= rtol * abs(hi):
            break
        mid = _midpoint(lo, hi)
        if not (lo < mid < hi):
            break
        if above(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def expand_up(above: Callable[[float], bool], start: float, limit: float = 1e300,
              max_steps: int = 2000, error: type[Exception] = BracketFailure) -> tuple[float, float]:
    """Double ``start`` until ``above`` holds; returns ``(last_false, first_true)``."""
    x = start
    prev = start
    for _ in range(max_steps):
        if above(x):
            return prev, x
        prev = x
        x *= 2.0
        if x > limit:
            break
    raise error(f"no bracket found above {start!r} (reached {x!r})")


def expand_down(above: Callable[[float], bool], start: float, floor: float = 1e-300,
                max_steps: int = 2000, error: type[Exception] = BracketFailure) -> tuple[float, float]:
    """Halve ``start`` until ``above`` fails; returns ``(first_false, last_true)``."""
    x = start
    prev = start
    for _ in range(max_steps):
        if not above(x):
            return x, prev
        prev = x
        x *= 0.5
        if x < floor:
            break
    raise error(f"no bracket found below {start!r} (reached {x!r})")


@dataclass(frozen=True)
class DyadicResult:
    """Outcome of a dyadic tail test for an integral over ``(0, upper]``."""

    value: float
    diverged: bool
    partial: float
    floor: float  # lowest dyadic point actually integrated down to
    tails: tuple[float, ...] = field(repr=False)
    ratio: float  # last observed tail ratio


def dyadic_limit(f: ArrayFn, upper: float, rtol: float = 1e-9, max_j: int = 60,
                 window: int = 10, ratio_tol: float = 1e-6) -> DyadicResult:
    """Integrate ``f`` over ``(0, upper]`` as a limit over dyadic pieces.

    Pieces ``T_j`` cover ``[upper 2^-(j+1), upper 2^-j]``. Divergence is
    declared when ``window`` consecutive ratios ``T_j / T_(j-1)`` are all at
    least ``1 - ratio_tol``. Convergence is declared when the geometric tail
    bound falls below ``rtol`` of the partial sum, or when the ratios have
    settled into an exactly geometric regime, in which case the remainder
    ``T_j rho / (1 - rho)`` is added in closed form.
    """
    tails: list[float] = []
    partial = 0.0
    hi = upper
    rho = math.nan
    for j in range(max_j):
        lo = 0.5 * hi
        t = integrate(f, lo, hi, rtol=0.1 * rtol).value
        if not math.isfinite(t):
            return DyadicResult(math.inf, True, math.inf, lo, tuple(tails + [t]), math.inf)
        tails.append(t)
        partial += t
        hi = lo
        if j < window:
            continue
        recent = tails[-window - 1:]
        if all(x == 0.0 for x in recent):
            return DyadicResult(partial, False, partial, lo, tuple(tails), 0.0)
        ratios = [b / a if a > 0 else (math.inf if b > 0 else 0.0)
                  for a, b in zip(recent[:-1], recent[1:])]
        rho = ratios[-1]
        if min(ratios) >= 1.0 - ratio_tol:
            return DyadicResult(math.inf, True, partial, lo, tuple(tails), rho)
        worst = max(ratios)
        if worst >= 1.0 - ratio_tol:
            continue
        remainder = t * rho / (1.0 - rho)
        settled = (worst - min(ratios)) <= 1e-6
        if settled or t * worst / (1.0 - worst) <= rtol * partial:
            return DyadicResult(partial + remainder, False, partial, lo, tuple(tails), rho)
    raise SlowConvergence(
        f"dyadic tail test undecided after {max_j} halvings (last ratio {rho!r})")
