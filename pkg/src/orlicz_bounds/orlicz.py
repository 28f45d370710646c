"""Orlicz functions, their conjugates and inverses, and Luxemburg norms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import NonConvexInput, OverflowRange
from .numerics import bisect_monotone, expand_down, expand_up

ScalarFn = Callable[[float], float]

PROBE_GRID = np.logspace(-4, 4, 64)

CONJUGATE_RTOL = 1e-12
INVERSE_RTOL = 1e-14
LUXEMBURG_RTOL = 1e-10
BRACKET_LIMIT = 1e300


def secant_convex(xs, ys, rtol: float = 1e-9) -> bool:
    """Secant test on consecutive triples of an increasing grid."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slopes = np.diff(ys) / np.diff(xs)
    slack = rtol * (np.abs(slopes[:-1]) + np.abs(slopes[1:])) + 1e-300
    return bool(np.all(slopes[1:] >= slopes[:-1] - slack))


def secant_concave(xs, ys, rtol: float = 1e-9) -> bool:
    return secant_convex(xs, -np.asarray(ys, dtype=float), rtol)


def _as_output(x, out):
    if np.ndim(x) == 0:
        return float(out)
    return out


class OrliczFunction:
    """A Young function ``phi`` given by an evaluator and its right derivative.

    ``domain_hint`` is the exponent ``p`` for the power family or the string
    ``"general"``. ``conjugate_factory`` (when given) returns the analytic
    conjugate; ``exact_inverse`` is an optional closed-form inverse.
    Construction runs a secant test on a fixed 64-point log grid.
    """

    def __init__(self, evaluate: Callable, derivative: Callable, *,
                 domain_hint: float | str = "general",
                 conjugate_factory: Callable[[], "OrliczFunction"] | None = None,
                 exact_inverse: Callable | None = None,
                 name: str = "phi", validate: bool = True):
        self._evaluate = evaluate
        self._derivative = derivative
        self.domain_hint = domain_hint
        self._conjugate_factory = conjugate_factory
        self._exact_inverse = exact_inverse
        self.name = name
        if validate:
            check_probe_grid(self)

    def __repr__(self) -> str:
        return f"OrliczFunction({self.name})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            return _as_output(x, self._evaluate(x))

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            return _as_output(x, self._derivative(x))

    @property
    def power(self) -> float | None:
        return self.domain_hint if not isinstance(self.domain_hint, str) else None

    @cached_property
    def analytic_conjugate(self) -> OrliczFunction | None:
        return self._conjugate_factory() if self._conjugate_factory else None

    @cached_property
    def conjugate(self) -> OrliczFunction:
        return conjugate(self)

    def inverse(self, y, numeric: bool = False):
        return inverse(self, y, numeric=numeric)


def check_probe_grid(phi: OrliczFunction) -> None:
    """Raise :class:`NonConvexInput` unless phi(0)=0 and phi is increasing and
    convex on the probe grid (non-finite values are skipped)."""
    if phi(0.0) != 0.0:
        raise NonConvexInput(f"{phi.name}(0) = {phi(0.0)!r}, expected 0")
    ys = np.asarray(phi(PROBE_GRID), dtype=float)
    ok = np.isfinite(ys)
    xs, ys = PROBE_GRID[ok], ys[ok]
    if len(xs) < 3:
        raise NonConvexInput(f"{phi.name} is not finite on the probe grid")
    if not np.all(np.diff(ys) > 0):
        raise NonConvexInput(f"{phi.name} is not strictly increasing on the probe grid")
    if not secant_convex(xs, ys):
        raise NonConvexInput(f"{phi.name} fails the secant convexity test")


def power(p: float) -> OrliczFunction:
    """``phi(x) = x**p / p`` with conjugate ``x**q / q``, ``1/p + 1/q = 1``."""
    if not p > 1:
        raise ValueError(f"power Orlicz function needs p > 1, got {p!r}")
    p = float(p)
    q = p / (p - 1.0)
    return OrliczFunction(
        lambda x: x ** p / p,
        lambda x: x ** (p - 1.0),
        domain_hint=p,
        conjugate_factory=lambda: power(q),
        exact_inverse=lambda y: (p * y) ** (1.0 / p),
        name=f"x^{p:g}/{p:g}",
        validate=False,
    )


def conjugate_exponent(p: float) -> float:
    return p / (p - 1.0)


def _maximizer(phi: OrliczFunction, x: float) -> float:
    """argmax over y >= 0 of ``x*y - phi(y)``, i.e. the solution of phi'(y) = x."""
    if x <= 0.0:
        return 0.0

    def above(y):
        return phi.derivative(y) >= x

    try:
        if above(1.0):
            lo, hi = expand_down(above, 1.0, floor=1e-300, error=OverflowRange)
        else:
            lo, hi = expand_up(above, 1.0, limit=BRACKET_LIMIT, error=OverflowRange)
    except OverflowRange:
        if above(1e-300):
            return 0.0
        raise
    lo, hi = bisect_monotone(above, lo, hi, rtol=CONJUGATE_RTOL)
    return 0.5 * (lo + hi)


def conjugate(phi: OrliczFunction, numeric: bool = False) -> OrliczFunction:
    """Convex conjugate ``psi(x) = sup_{y>=0} (x*y - phi(y))``.

    Returns the analytic conjugate when one is attached (unless ``numeric``).
    The numeric path locates the maximiser by bracketing and bisection on
    ``phi'``; the derivative of the result is that maximiser.
    """
    if not numeric and phi.analytic_conjugate is not None:
        return phi.analytic_conjugate
    check_probe_grid(phi)

    def arg(x: float) -> float:
        return _maximizer(phi, x)

    def value(x: float) -> float:
        y = arg(x)
        return x * y - float(phi(y))

    return OrliczFunction(
        np.vectorize(value, otypes=[float]),
        np.vectorize(arg, otypes=[float]),
        domain_hint="general",
        name=f"conj({phi.name})",
        validate=False,
    )


def inverse(phi: OrliczFunction, y, numeric: bool = False):
    """``x`` with ``phi(x) = y``; exact for y = 0."""
    if np.ndim(y) > 0:
        if not numeric and phi._exact_inverse is not None:
            return np.asarray(phi._exact_inverse(np.asarray(y, dtype=float)), dtype=float)
        return np.vectorize(lambda v: inverse(phi, v, numeric), otypes=[float])(y)
    y = float(y)
    if y < 0:
        raise ValueError("inverse needs y >= 0")
    if y == 0.0:
        return 0.0
    if not numeric and phi._exact_inverse is not None:
        return float(phi._exact_inverse(y))

    def above(x):
        return phi(x) >= y

    if above(1.0):
        lo, hi = expand_down(above, 1.0, floor=1e-300, error=OverflowRange)
    else:
        lo, hi = expand_up(above, 1.0, limit=BRACKET_LIMIT, error=OverflowRange)
    lo, hi = bisect_monotone(above, lo, hi, rtol=INVERSE_RTOL)
    return 0.5 * (lo + hi)


def young_gap(phi: OrliczFunction, x: float, y: float) -> float:
    """``phi(x) + psi(y) - x*y``; nonnegative up to rounding."""
    psi = phi.conjugate
    return float(phi(x)) + float(psi(y)) - x * y


@dataclass(frozen=True)
class EmpiricalSample:
    values: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size == 0:
            raise ValueError("empirical sample must be nonempty")
        object.__setattr__(self, "values", values)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != values.shape:
                raise ValueError("weights and values differ in length")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("weights must be nonnegative and sum to 1")
            object.__setattr__(self, "weights", w)

    @property
    def probabilities(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.values.size, 1.0 / self.values.size)
        return self.weights


def luxemburg_norm(phi: OrliczFunction, sample: EmpiricalSample | Sequence[float]) -> float:
    """``inf{c > 0 : sum_i w_i phi(|v_i| / c) <= 1}``."""
    if not isinstance(sample, EmpiricalSample):
        sample = EmpiricalSample(np.asarray(sample, dtype=float))
    v = np.abs(sample.values)
    w = sample.probabilities
    if not np.any(v > 0):
        return 0.0
    one = inverse(phi, 1.0)
    hi = float(v.max()) / one
    lo = float(w @ v) / one  # Jensen: any c below this has modular > 1

    def feasible(c):
        return float(w @ phi(v / c)) <= 1.0

    if hi <= lo or feasible(lo):
        return lo if feasible(lo) else hi
    if not feasible(hi):
        # rounding at the max-value bound; nudge outward
        lo, hi = expand_up(feasible, hi, limit=BRACKET_LIMIT, error=OverflowRange)
    lo, hi = bisect_monotone(feasible, lo, hi, rtol=LUXEMBURG_RTOL)
    return hi
