"""The lower-bound process ``X(t, w) = G(d(w, t)) - G(d(w, 0))``.

``G`` is the antiderivative of a piecewise density ``g`` whose mass on level
k is ``S_k / K`` with ``K = 3(n + 2)``. The probability space is ``T`` itself
with normalised Lebesgue measure, so ``w`` is sampled uniformly on the ball.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import BoundsReport, lower_constant, solve_cutoff
from .errors import InfiniteLevel, OutOfBall
from .geometry import Modulus, NormSpace, metric, sample_ball, sample_ball_sharded
from .numerics import dyadic_limit, integrate
from .orlicz import OrliczFunction
from .partition import Partition

TABLE_RTOL = 1e-10
PAIR_FLOOR = 1e-6  # smallest ||s - t|| / r used for near-diagonal pairs
MAX_DEPTH = 48


@dataclass(frozen=True)
class Level:
    lower: float
    upper: float
    s: float


class DensityG:
    """Piecewise density ``g`` and its tabulated antiderivative.

    Each panel stores a cubic Hermite interpolant of ``integral_a^x g`` (with
    the exact ``g`` as slope data), refined until the midpoint prediction
    error is below ``1e-10`` of the level's mass. Cumulative sums are kept
    from both ends, so ``G(x) = integral_0^x g`` and
    ``H(x) = integral_x^{eta(r)} g`` are each accurate relative to their own
    size; :meth:`increment` picks the smaller one to avoid cancellation when
    most of the mass sits at fine scales.
    """

    def __init__(self, space: NormSpace, modulus: Modulus, psi: OrliczFunction,
                 levels: list[Level], quad_tol: float = 1e-12):
        self.space = space
        self.modulus = modulus
        self.psi = psi
        self.K = lower_constant(space.n)
        self.levels = sorted(levels, key=lambda lv: lv.lower)
        self.eta_r = float(modulus(space.r))
        self.total_mass = math.fsum(lv.s for lv in self.levels) / self.K
        self._quad_tol = quad_tol
        self._build_table()

    # density -------------------------------------------------------------

    def lam(self, eps):
        return (np.asarray(self.modulus.inverse(eps), dtype=float) / self.space.r) ** self.space.n

    def level_density(self, level: Level, eps):
        eps = np.asarray(eps, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            x = eps / (level.s * self.lam(eps))
            return np.asarray(self.psi(x), dtype=float) / x / self.K

    def g(self, eps):
        """Density value; 0 outside the tabulated levels and above ``eta(r)``."""
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        out = np.zeros_like(eps)
        for lv in self.levels:
            sel = (eps > lv.lower) & (eps <= lv.upper)
            if np.any(sel):
                out[sel] = self.level_density(lv, eps[sel])
        return out

    def level_mass(self, level: Level, rtol: float = 1e-12) -> float:
        """Quadrature of ``g`` over one level, independent of the table."""
        f = lambda e: self.level_density(level, e)
        if level.lower > 0:
            return integrate(f, level.lower, level.upper, rtol=rtol).value
        return dyadic_limit(f, level.upper, rtol=rtol).value

    # antiderivative table ------------------------------------------------

    def _build_table(self) -> None:
        panels: list[list[float]] = []
        self._floor_mass = 0.0
        self._floor_exponent = 1.0
        for lv in self.levels:
            f = lambda e, lv=lv: self.level_density(lv, e)
            target = lv.s / self.K
            local: list[list[float]] = []
            if lv.lower > 0:
                pieces = [(lv.lower, lv.upper)]
                below = 0.0
            else:
                # true terminal level: dyadic pieces down to a floor, power law below it
                res = dyadic_limit(f, lv.upper, rtol=self._quad_tol)
                below = res.value - res.partial
                self._floor_exponent = -math.log2(res.ratio) if res.ratio > 0 else 1.0
                edges = [lv.upper * 0.5 ** j for j in range(len(res.tails) + 1)][::-1]
                pieces = list(zip(edges[:-1], edges[1:]))
            tol = TABLE_RTOL * target
            for a, b in pieces:
                self._refine(f, a, b, tol, local, 0)
            acc = below + math.fsum(row[2] for row in local)
            scale = target / acc if acc > 0 else 1.0
            if lv.lower == 0:
                self._floor_mass = below * scale
            panels.extend([a, b, m * scale, da * scale, db * scale] for a, b, m, da, db in local)
        arr = np.array(panels, dtype=float).reshape(-1, 5)
        self._a, self._b, self._m, self._da, self._db = arr.T
        # mass strictly below / strictly above each panel
        cum = np.cumsum(self._m)
        self._below = self._floor_mass + cum - self._m
        rev = np.cumsum(self._m[::-1])[::-1]
        self._above = rev - self._m
        self._panel_total = float(rev[0]) if len(rev) else 0.0

    def _refine(self, f, a, b, tol, out, depth) -> None:
        whole = integrate(f, a, b, rtol=self._quad_tol).value
        m = math.sqrt(a * b) if a > 0 and b > 4 * a else 0.5 * (a + b)
        da, db = float(f(np.array([a]))[0]), float(f(np.array([b]))[0])
        left = integrate(f, a, m, rtol=self._quad_tol).value
        pred = _hermite(m, a, b, 0.0, whole, da, db)
        if depth >= MAX_DEPTH or abs(pred - left) <= tol or not (a < m < b):
            out.append([a, b, whole, da, db])
            return
        self._refine(f, a, m, tol, out, depth + 1)
        self._refine(f, m, b, tol, out, depth + 1)

    def _locate(self, e: np.ndarray):
        """Panel index per point: -1 below the first panel, len(panels) at or above the top."""
        idx = np.searchsorted(self._a, e, side="right") - 1
        idx = np.where(e >= self._b[-1], len(self._a), idx)
        return idx

    def _local(self, e: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """``integral_{a_i}^e g`` inside panel ``i`` (or inside the floor region for i = -1)."""
        out = np.zeros_like(e)
        inner = (idx >= 0) & (idx < len(self._a))
        if np.any(inner):
            i = idx[inner]
            out[inner] = _hermite(e[inner], self._a[i], self._b[i], 0.0, self._m[i],
                                  self._da[i], self._db[i])
        low = idx < 0
        if np.any(low) and self._floor_mass > 0:
            out[low] = self._floor_mass * (np.maximum(e[low], 0.0) / self._a[0]) ** self._floor_exponent
        return out

    def _both(self, e: np.ndarray):
        idx = self._locate(e)
        loc = self._local(e, idx)
        n = len(self._a)
        inner = (idx >= 0) & (idx < n)
        i = np.clip(idx, 0, n - 1)
        G = np.where(inner, self._below[i] + loc, 0.0)
        H = np.where(inner, self._above[i] + (self._m[i] - loc), 0.0)
        low = idx < 0
        G = np.where(low, loc, G)
        H = np.where(low, (self._floor_mass - loc) + self._panel_total, H)
        top = idx >= n
        G = np.where(top, self.total_mass, G)
        return idx, loc, G, H

    def G(self, eps):
        """``integral_0^eps g``."""
        e = np.atleast_1d(np.asarray(eps, dtype=float))
        out = self._both(e)[2]
        return float(out[0]) if np.ndim(eps) == 0 else out

    def H(self, eps):
        """``integral_eps^{eta(r)} g``."""
        e = np.atleast_1d(np.asarray(eps, dtype=float))
        out = self._both(e)[3]
        return float(out[0]) if np.ndim(eps) == 0 else out

    def increment(self, lo, hi):
        """``G(hi) - G(lo)`` without cancellation between large cumulative masses."""
        lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
        lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
        i_lo, loc_lo, G_lo, H_lo = self._both(lo)
        i_hi, loc_hi, G_hi, H_hi = self._both(hi)
        same = i_lo == i_hi
        use_h = np.maximum(H_lo, H_hi) < np.maximum(G_lo, G_hi)
        out = np.where(use_h, H_lo - H_hi, G_hi - G_lo)
        out = np.where(same, loc_hi - loc_lo, out)
        return out


def _hermite(x, a, b, ga, gb, da, db):
    h = b - a
    t = (x - a) / h
    t2 = t * t
    t3 = t2 * t
    return ((2 * t3 - 3 * t2 + 1) * ga + (t3 - 2 * t2 + t) * h * da
            + (-2 * t3 + 3 * t2) * gb + (t3 - t2) * h * db)


def partition_of(report: BoundsReport, space: NormSpace) -> Partition:
    return Partition(report.radii, report.labels, report.terminal_m, report.truncated,
                     space.r, space.n)


def build_density(space: NormSpace, modulus: Modulus, phi: OrliczFunction, report: BoundsReport,
                  terminal_delta: float | None = None) -> DensityG:
    """Density for the solved levels of ``report``.

    An infinite terminal level raises :class:`InfiniteLevel` unless
    ``terminal_delta`` is given, in which case that level is replaced by its
    cut-off version on ``[terminal_delta, r_m]`` with constant ``S_m(delta)``.
    Levels past a truncation carry no mass.
    """
    levels = []
    for k, s in enumerate(report.s_values):
        lower, upper = report.radii[k + 1], report.radii[k]
        if not math.isfinite(s):
            if report.terminal_m == k and terminal_delta is not None:
                s = solve_cutoff(space, modulus, phi, partition_of(report, space),
                                 terminal_delta * upper).value
                lower = terminal_delta * upper
            else:
                raise InfiniteLevel(f"S_{k} is infinite; the process is undefined")
        if not s > 0:
            raise InfiniteLevel(f"S_{k} = {s!r} is not positive")
        levels.append(Level(lower, upper, s))
    return DensityG(space, modulus, phi.conjugate, levels)


def _check_in_ball(space: NormSpace, x) -> np.ndarray:
    x = space._check(x)
    if np.any(np.asarray(space.norm(x)) > space.r * (1.0 + 1e-12)):
        raise OutOfBall("point outside T")
    return x


def antipode(space: NormSpace, omega) -> np.ndarray:
    """``((||w|| - r) / ||w||) w``: the boundary point at distance r from ``w``."""
    omega = np.asarray(omega, dtype=float)
    nw = space.norm(omega)
    if nw == 0:
        e = np.zeros(space.n)
        e[0] = 1.0
        return -space.r * e / space.norm(e)
    return (nw - space.r) / nw * omega


def evaluate_path(density: DensityG, space: NormSpace, modulus: Modulus, omega, points) -> np.ndarray:
    """``X(t, w)`` for each row ``t`` of ``points``."""
    omega = _check_in_ball(space, omega)
    pts = _check_in_ball(space, np.atleast_2d(points))
    d_t = np.atleast_1d(metric(space, modulus, pts, omega))
    d_0 = metric(space, modulus, np.zeros(space.n), omega)
    return density.increment(np.full_like(d_t, d_0), d_t)


class ProcessSample:
    """One path ``t -> X(t, w)`` for a fixed ``w``."""

    def __init__(self, density: DensityG, space: NormSpace, modulus: Modulus, omega):
        self.density, self.space, self.modulus = density, space, modulus
        self.omega = _check_in_ball(space, omega)

    def __call__(self, points):
        return evaluate_path(self.density, self.space, self.modulus, self.omega, points)


@dataclass(frozen=True)
class PairEstimate:
    s: np.ndarray
    t: np.ndarray
    d: float
    estimate: float
    stderr: float


@dataclass(frozen=True)
class IncrementCheck:
    max_estimate: float
    stderr: float
    pairs: list[PairEstimate]

    @property
    def passed(self) -> bool:
        return all(p.estimate <= 1.0 + 3.0 * p.stderr for p in self.pairs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "t", "d", "estimate", "stderr"])
        for p in self.pairs:
            w.writerow([_vec(p.s), _vec(p.t), _f(p.d), _f(p.estimate), _f(p.stderr)])
        return buf.getvalue()


def _f(x) -> str:
    return format(float(x), ".17g")


def _vec(v) -> str:
    return ";".join(_f(x) for x in np.atleast_1d(v))


def _increment_stats(density, space, modulus, phi, s, t, omegas) -> PairEstimate:
    d = float(metric(space, modulus, s, t))
    if not d > 0:
        raise ValueError("degenerate pair: d(s, t) = 0")
    dx = density.increment(metric(space, modulus, omegas, t), metric(space, modulus, omegas, s))
    vals = np.asarray(phi(np.abs(dx) / d), dtype=float)
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.inf
    return PairEstimate(np.asarray(s), np.asarray(t), d, float(vals.mean()), se)


def estimate_increment(density: DensityG, space: NormSpace, modulus: Modulus, phi: OrliczFunction,
                       s, t, mc_count: int, seed: int, shards: int = 1) -> tuple[float, float]:
    """Monte Carlo ``E phi(|X(s) - X(t)| / d(s, t))`` with its standard error."""
    s = _check_in_ball(space, s)
    t = _check_in_ball(space, t)
    omegas = sample_ball_sharded(space, mc_count, seed, shards)
    est = _increment_stats(density, space, modulus, phi, s, t, omegas)
    return est.estimate, est.stderr


def _random_direction(space: NormSpace, rng) -> np.ndarray:
    while True:
        v = rng.standard_normal(space.n)
        nv = space.norm(v)
        if nv > 0:
            return v / nv


def sample_pairs(density: DensityG, space: NormSpace, modulus: Modulus, count: int,
                 rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """Half uniform pairs on ``T``; the rest stratified over the levels so that
    ``d(s, t)`` falls inside each level in turn (levels finer than
    ``||s - t|| = 1e-6 r`` are skipped, being below double precision here)."""
    n_uniform = count - count // 2
    pts = sample_ball(space, max(2 * n_uniform, 1), rng).points
    pairs = []
    for i in range(n_uniform):
        s, t = pts[2 * i], pts[2 * i + 1]
        if space.norm(s - t) > 0:
            pairs.append((s, t))
    floor_d = float(modulus(PAIR_FLOOR * space.r))
    strata = [(max(lv.lower, floor_d), lv.upper) for lv in reversed(density.levels)
              if lv.upper > floor_d]
    pool = iter(())
    j = 0
    while len(pairs) < count and strata:
        lo, hi = strata[j % len(strata)]
        j += 1
        d = math.exp(rng.uniform(math.log(lo), math.log(hi))) if lo > 0 else rng.uniform(0, hi)
        dist = float(modulus.inverse(d))
        for _ in range(1000):
            s = next(pool, None)
            if s is None:
                pool = iter(sample_ball(space, 1024, rng).points)
                s = next(pool)
            v = _random_direction(space, rng) * dist
            t = next((c for c in (s + v, s - v) if space.norm(c) <= space.r), None)
            if t is not None and space.norm(t - s) > 0:
                pairs.append((s, t))
                break
    while len(pairs) < count:
        s, t = sample_ball(space, 2, rng).points
        if space.norm(s - t) > 0:
            pairs.append((s, t))
    return pairs


def verify_increment_condition(density: DensityG, space: NormSpace, modulus: Modulus,
                               phi: OrliczFunction, pair_count: int, mc_count: int, seed: int,
                               shards: int = 4, jobs: int = 1) -> IncrementCheck:
    """Largest Monte Carlo estimate of ``E phi(|X(s) - X(t)| / d(s, t))`` over sampled pairs.

    The same ``w`` sample (drawn in ``shards`` seeded blocks) serves every
    pair; results do not depend on ``jobs``.
    """
    if pair_count < 1 or mc_count < 2:
        raise ValueError("need pair_count >= 1 and mc_count >= 2")
    pair_seed, omega_seed = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(pair_seed)
    pairs = sample_pairs(density, space, modulus, pair_count, rng)
    omegas = sample_ball_sharded(space, mc_count, omega_seed, shards)

    def one(pair):
        return _increment_stats(density, space, modulus, phi, pair[0], pair[1], omegas)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, pairs))
    else:
        results = [one(p) for p in pairs]
    worst = max(results, key=lambda p: p.estimate)
    return IncrementCheck(worst.estimate, worst.stderr, results)


@dataclass(frozen=True)
class SupIdentity:
    empirical_mean_sup: float
    target: float
    max_deviation: float
    mean_sup_without_extremizers: float

    def to_json(self, extra: dict | None = None) -> str:
        data = {
            "empirical_mean_sup": self.empirical_mean_sup,
            "target": self.target,
            "max_deviation": self.max_deviation,
            "mean_sup_without_extremizers": self.mean_sup_without_extremizers,
        }
        data.update(extra or {})
        return json.dumps(data, indent=2, sort_keys=True) + "\n"


def verify_sup_identity(density: DensityG, space: NormSpace, modulus: Modulus, grid_count: int,
                        mc_count: int, seed: int) -> SupIdentity:
    """Per-path ``sup_{s,t} |X(s) - X(t)|`` on a grid that includes ``w`` and its
    antipode, compared with ``G(eta(r)) = sum_k S_k / K``."""
    if grid_count < 2:
        raise ValueError("grid_count must be >= 2")
    grid_seed, omega_seed = np.random.SeedSequence(seed).spawn(2)
    grid = sample_ball(space, grid_count, grid_seed).points
    omegas = sample_ball(space, mc_count, omega_seed).points
    target = density.total_mass
    sups, plain = [], []
    for w in omegas:
        extra = np.vstack([w, antipode(space, w)])
        vals = evaluate_path(density, space, modulus, w, grid)
        ends = evaluate_path(density, space, modulus, w, extra)
        plain.append(vals.max() - vals.min())
        allv = np.concatenate([vals, ends])
        sups.append(allv.max() - allv.min())
    sups = np.asarray(sups)
    return SupIdentity(float(sups.mean()), target, float(np.abs(sups - target).max()),
                       float(np.mean(plain)))
