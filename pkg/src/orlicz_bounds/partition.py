"""The decreasing scale sequence r_0 > r_1 > ... and its I/J labelling.

Each step takes the smaller of two candidates: halving the current scale
(label ``I``) or the point where ``eps / eta^-1(eps)`` has doubled relative
to the current scale (label ``J``). Once the modulus has finite slope at 0
the doubling candidate can collapse to 0, which ends the sequence at the
terminal index ``m``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .errors import NonConcaveModulus
from .geometry import Modulus, NormSpace, check_modulus
from .numerics import bisect_monotone, expand_down

I, J = "I", "J"

DEFAULT_K_MAX = 200
DEFAULT_R_MIN_FACTOR = 1e-15
TIE_RTOL = 1e-8
ROOT_RTOL = 1e-12


@dataclass(frozen=True)
class Partition:
    """``radii[k]`` for k = 0..len(labels); level k spans ``[radii[k+1], radii[k]]``.

    When ``terminal_m`` is set the last radius is exactly 0.
    """

    radii: tuple[float, ...]
    labels: tuple[str, ...]
    terminal_m: int | None
    truncated: bool
    r: float
    n: int

    @property
    def levels(self) -> int:
        return len(self.labels)

    @property
    def r0(self) -> float:
        return self.radii[0]

    def bounds(self, k: int) -> tuple[float, float]:
        """``(r_{k+1}, r_k)``."""
        return self.radii[k + 1], self.radii[k]

    def is_terminal(self, k: int) -> bool:
        return self.terminal_m is not None and k == self.terminal_m

    def rows(self) -> list[tuple[int, float, str]]:
        out = []
        for k, rk in enumerate(self.radii):
            out.append((k, rk, self.labels[k] if k < len(self.labels) else ""))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "r_k", "label"])
        for k, rk, lab in self.rows():
            w.writerow([k, format(rk, ".17g"), lab])
        return buf.getvalue()


def build_partition(space: NormSpace, modulus: Modulus, k_max: int = DEFAULT_K_MAX,
                    r_min: float | None = None) -> Partition:
    """Run the scale recursion starting from ``r_0 = eta(r)``.

    Stops at the terminal index (next scale 0), after ``k_max`` levels, or
    once a scale drops below ``r_min`` (default ``1e-15 * r_0``); the last two
    set ``truncated``. Ties between the two candidates are labelled ``I``.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    r0 = float(modulus(space.r))
    if r_min is None:
        r_min = DEFAULT_R_MIN_FACTOR * r0
    if not r_min > 0:
        raise ValueError("r_min must be positive")
    check_modulus(modulus, r0)

    h = modulus.slope_ratio
    slope0 = modulus.derivative_at_zero
    radii = [r0]
    labels: list[str] = []
    terminal = None
    truncated = False
    k = 0
    while True:
        rk = radii[-1]
        target = 2.0 * h(rk)
        half = 0.5 * rk
        h_half = h(half)
        if h_half >= target * (1.0 - TIE_RTOL):
            nxt, lab = half, I
        elif math.isfinite(slope0) and slope0 <= target * (1.0 + 1e-12):
            nxt, lab = 0.0, J
        else:
            def in_set(eps, target=target):
                return h(eps) <= target
            try:
                lo, hi = expand_down(in_set, half, floor=1e-300, error=NonConcaveModulus)
            except NonConcaveModulus:
                nxt, lab = 0.0, J
            else:
                lo, hi = bisect_monotone(in_set, lo, hi, rtol=ROOT_RTOL)
                nxt, lab = hi, J
        radii.append(nxt)
        labels.append(lab)
        if nxt == 0.0:
            terminal = k
            break
        if nxt < r_min or len(labels) >= k_max:
            truncated = True
            break
        k += 1
    return Partition(tuple(radii), tuple(labels), terminal, truncated, space.r, space.n)


def power_ratio(alpha: float) -> float:
    """Per-step factor ``r_{k+1} / r_k`` for ``eta(x) = x**alpha``, alpha < 1."""
    return min(0.5, 2.0 ** (-alpha / (1.0 - alpha)))
