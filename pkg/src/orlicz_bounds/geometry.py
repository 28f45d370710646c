"""Norm balls in R^n, dual norms, volumes, uniform sampling and the modulus eta."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import DimensionMismatch, NonConcaveModulus, RejectionStalled
from .numerics import bisect_monotone, expand_up

MIN_ACCEPTANCE = 1e-6
GENERIC_DUAL_POINTS = 100_000
GENERIC_VOLUME_POINTS = 1_000_000


@dataclass(frozen=True)
class NormSpace:
    """The ball ``T = B(0, r)`` of a norm on R^n.

    ``kind`` is ``"lp"`` (exponent ``p`` in [1, inf]), ``"weighted"``
    (``||x|| = ||w * x||_p``) or ``"generic"`` (``norm_fn`` acting on the last
    axis, with ``box`` the coordinate half-widths of the unit ball).
    """

    n: int
    r: float = 1.0
    kind: str = "lp"
    p: float = 2.0
    weights: tuple[float, ...] | None = None
    norm_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    box: tuple[float, ...] | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.n!r}")
        if not self.r > 0:
            raise ValueError(f"radius must be positive, got {self.r!r}")
        if self.kind in ("lp", "weighted") and not self.p >= 1:
            raise ValueError(f"l_p exponent must be >= 1, got {self.p!r}")
        if self.kind == "weighted":
            if self.weights is None or len(self.weights) != self.n or min(self.weights) <= 0:
                raise ValueError("weighted norm needs n positive weights")
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        elif self.kind == "generic":
            if self.norm_fn is None:
                raise ValueError("generic norm needs norm_fn")
            if self.box is None:
                object.__setattr__(self, "box", (1.0,) * self.n)
        elif self.kind != "lp":
            raise ValueError(f"unknown norm kind {self.kind!r}")

    @classmethod
    def lp(cls, n: int, p: float, r: float = 1.0) -> NormSpace:
        return cls(n=n, r=r, kind="lp", p=float(p))

    @property
    def exact(self) -> bool:
        """Whether dual norms and volumes are closed-form (not estimated)."""
        return self.kind != "generic"

    @property
    def q(self) -> float:
        return dual_exponent(self.p)

    @property
    def half_widths(self) -> np.ndarray:
        """Coordinate half-widths of the unit ball."""
        if self.kind == "lp":
            return np.ones(self.n)
        if self.kind == "weighted":
            return 1.0 / np.asarray(self.weights)
        return np.asarray(self.box, dtype=float)

    def _check(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1:] != (self.n,):
            raise DimensionMismatch(f"expected vectors of length {self.n}, got shape {v.shape}")
        return v

    def norm(self, x):
        x = self._check(x)
        if self.kind == "lp":
            out = _lp(x, self.p)
        elif self.kind == "weighted":
            out = _lp(x * np.asarray(self.weights), self.p)
        else:
            out = np.asarray(self.norm_fn(x), dtype=float)
        return float(out) if np.ndim(out) == 0 else out

    def dual_space(self) -> NormSpace:
        if self.kind == "lp":
            return NormSpace(self.n, self.r, "lp", self.q)
        if self.kind == "weighted":
            return NormSpace(self.n, self.r, "weighted", self.q,
                             tuple(1.0 / w for w in self.weights))
        raise NotImplementedError("dual space of a generic norm is not representable")

    def contains(self, x, slack: float = 0.0) -> np.ndarray:
        return self.norm(x) <= self.r * (1.0 + slack)


def dual_exponent(p: float) -> float:
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _lp(x: np.ndarray, p: float) -> np.ndarray:
    a = np.abs(x)
    if math.isinf(p):
        return a.max(axis=-1)
    if p == 1.0:
        return a.sum(axis=-1)
    if p == 2.0:
        return np.sqrt((a * a).sum(axis=-1))
    # scale by the max entry to avoid overflow in a**p
    m = a.max(axis=-1)
    safe = np.where(m > 0, m, 1.0)
    return m * ((a / np.expand_dims(safe, -1)) ** p).sum(axis=-1) ** (1.0 / p)


def dual_norm(space: NormSpace, v):
    """``sup_{||u|| <= 1} |<u, v>|``.

    Exact for l_p and weighted l_p. For generic norms this is a lower bound
    from 10^5 quasi-random unit-ball points pushed to the sphere; check
    ``space.exact`` before relying on it.
    """
    v = space._check(v)
    if space.kind == "lp":
        out = _lp(v, space.q)
    elif space.kind == "weighted":
        out = _lp(v / np.asarray(space.weights), space.q)
    else:
        u = _generic_sphere_points(space)
        out = np.abs(v @ u.T).max(axis=-1) if v.ndim > 1 else np.abs(u @ v).max()
    return float(out) if np.ndim(out) == 0 else out


def _generic_sphere_points(space: NormSpace) -> np.ndarray:
    cached = space.__dict__.get("_sphere_points")
    if cached is not None:
        return cached
    sob = qmc.Sobol(space.n, scramble=True, seed=12345)
    m = int(math.ceil(math.log2(GENERIC_DUAL_POINTS)))
    box = space.half_widths
    pts = (2.0 * sob.random_base2(m) - 1.0) * box
    norms = np.asarray(space.norm_fn(pts), dtype=float)
    keep = norms > 0
    u = pts[keep] / norms[keep, None]
    object.__setattr__(space, "_sphere_points", u)
    return u


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    stderr: float = 0.0


def unit_ball_volume(space: NormSpace, seed: int = 0) -> float:
    return unit_ball_volume_estimate(space, seed).value


def unit_ball_volume_estimate(space: NormSpace, seed: int = 0,
                              points: int = GENERIC_VOLUME_POINTS) -> VolumeEstimate:
    """Volume of ``B(0, 1)``; closed form for l_p, rejection Monte Carlo otherwise."""
    n = space.n
    if space.kind in ("lp", "weighted"):
        p = space.p
        if math.isinf(p):
            vol = 2.0 ** n
        else:
            vol = math.exp(n * math.log(2.0) + n * math.lgamma(1.0 + 1.0 / p)
                           - math.lgamma(1.0 + n / p))
        if space.kind == "weighted":
            vol /= math.prod(space.weights)
        return VolumeEstimate(vol, 0.0)
    rng = np.random.default_rng(seed)
    box = space.half_widths
    x = rng.uniform(-1.0, 1.0, size=(points, n)) * box
    hit = (np.asarray(space.norm_fn(x)) <= 1.0).astype(float)
    frac = hit.mean()
    box_vol = float(np.prod(2.0 * box))
    se = math.sqrt(max(frac * (1 - frac), 0.0) / points)
    return VolumeEstimate(frac * box_vol, se * box_vol)


@dataclass(frozen=True)
class BallSample:
    points: np.ndarray
    acceptance: float


def sample_ball(space: NormSpace, count: int, seed: int | np.random.SeedSequence) -> BallSample:
    """``count`` points uniform on ``B(0, r)`` by rejection from its bounding box.

    Every returned point satisfies ``norm(x) <= r`` as evaluated on the
    returned coordinates.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    n = space.n
    box = space.half_widths * space.r
    if space.exact:
        expected = unit_ball_volume(space) / float(np.prod(2.0 * space.half_widths))
        if expected < MIN_ACCEPTANCE:
            raise RejectionStalled(f"expected acceptance {expected:.3g} below {MIN_ACCEPTANCE}")
    else:
        expected = 0.5
    chunks = []
    got = 0
    proposed = 0
    while got < count:
        batch = int(min(max(2 * (count - got) / max(expected, MIN_ACCEPTANCE), 1024), 2_000_000))
        x = rng.uniform(-1.0, 1.0, size=(batch, n)) * box
        proposed += batch
        x = x[space.norm(x) <= space.r]
        chunks.append(x)
        got += len(x)
        if proposed >= 10_000_000 and got / proposed < MIN_ACCEPTANCE:
            raise RejectionStalled(f"acceptance {got / proposed:.3g} after {proposed} proposals")
    pts = np.concatenate(chunks)[:count]
    return BallSample(pts, got / proposed)


def sample_ball_sharded(space: NormSpace, count: int, seed: int | np.random.SeedSequence,
                        shards: int = 1) -> np.ndarray:
    """Concatenation (in shard order) of per-shard samples with spawned seeds."""
    if shards < 1:
        raise ValueError("shards must be >= 1")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(shards)
    sizes = [count // shards + (1 if i < count % shards else 0) for i in range(shards)]
    parts = [sample_ball(space, s, c).points for s, c in zip(sizes, children) if s > 0]
    return np.concatenate(parts) if parts else np.empty((0, space.n))


def quasi_ball_points(space: NormSpace, count: int, seed: int = 0) -> np.ndarray:
    """At least ``count`` scrambled-Sobol points of the box that land in ``T``."""
    sob = qmc.Sobol(space.n, scramble=True, seed=seed)
    box = space.half_widths * space.r
    out = np.empty((0, space.n))
    m = int(math.ceil(math.log2(max(4 * count, 16))))
    while len(out) < count:
        # later draws double the sequence length to keep its balance properties
        x = (2.0 * sob.random_base2(m) - 1.0) * box
        m = int(math.log2(sob.num_generated))
        out = np.concatenate([out, x[space.norm(x) <= space.r]])
    return out[:count]


class Modulus:
    """Concave, strictly increasing ``eta`` with ``eta(0) = 0``.

    ``derivative_at_zero`` is ``math.inf`` or the finite slope at 0.
    """

    def __init__(self, eta: Callable, eta_inverse: Callable | None = None, *,
                 derivative_at_zero: float, kind: str = "generic",
                 alpha: float | None = None, name: str = "eta"):
        self._eta = eta
        self._eta_inverse = eta_inverse
        self.derivative_at_zero = float(derivative_at_zero)
        self.kind = kind
        self.alpha = alpha
        self.name = name

    def __repr__(self) -> str:
        return f"Modulus({self.name})"

    @classmethod
    def power(cls, alpha: float) -> Modulus:
        """``eta(x) = x**alpha``, ``0 < alpha <= 1``."""
        if not 0 < alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
        alpha = float(alpha)
        return cls(lambda x: x ** alpha, lambda y: y ** (1.0 / alpha),
                   derivative_at_zero=math.inf if alpha < 1 else 1.0,
                   kind="power", alpha=alpha, name=f"x^{alpha:g}")

    @classmethod
    def identity(cls) -> Modulus:
        return cls.power(1.0)

    @classmethod
    def capped(cls, alpha: float, slope: float) -> Modulus:
        """``eta(x) = min(slope * x, x**alpha)``: a power law capped by a line
        through 0, so ``eta'(0) = slope`` is finite."""
        if not 0 < alpha < 1 or not slope > 0:
            raise ValueError("capped modulus needs 0 < alpha < 1 and slope > 0")
        a, s = float(alpha), float(slope)
        return cls(lambda x: np.minimum(s * x, x ** a),
                   lambda y: np.maximum(y / s, y ** (1.0 / a)),
                   derivative_at_zero=s, kind="generic", alpha=None,
                   name=f"min({s:g}x, x^{a:g})")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self._eta(x)
        return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if self._eta_inverse is not None:
            out = self._eta_inverse(y)
            return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)
        if y.ndim:
            return np.vectorize(self._numeric_inverse, otypes=[float])(y)
        return self._numeric_inverse(float(y))

    def _numeric_inverse(self, y: float) -> float:
        if y <= 0:
            return 0.0

        def above(x):
            return self(x) >= y

        lo, hi = expand_up(above, 1e-300 if above(1.0) else 1.0)
        if lo == hi:
            lo = 0.0
        lo, hi = bisect_monotone(above, lo, hi, rtol=1e-15)
        return 0.5 * (lo + hi)

    def slope_ratio(self, eps):
        """``eps / eta^{-1}(eps)``, nonincreasing for a concave modulus."""
        eps = np.asarray(eps, dtype=float)
        out = eps / self.inverse(eps)
        return float(out) if np.ndim(out) == 0 else out


def check_modulus(modulus: Modulus, top: float, points: int = 64) -> None:
    """Probe ``eps / eta^{-1}(eps)`` for monotonicity on a log grid below ``top``."""
    grid = np.logspace(math.log10(top) - 12, math.log10(top), points)
    h = np.asarray(modulus.slope_ratio(grid), dtype=float)
    if not np.all(np.diff(h) <= 1e-10 * np.abs(h[:-1])):
        raise NonConcaveModulus(f"{modulus.name}: eps/eta^-1(eps) is not nonincreasing")


def metric(space: NormSpace, modulus: Modulus, s, t):
    """``d(s, t) = eta(||s - t||)``."""
    s = space._check(s)
    t = space._check(t)
    return modulus(space.norm(s - t))


def ball_measure_fraction(space: NormSpace, modulus: Modulus, eps: float) -> float:
    """Normalised volume of an interior d-ball: ``min(1, (eta^-1(eps) / r)^n)``."""
    return min(1.0, (float(modulus.inverse(eps)) / space.r) ** space.n)
