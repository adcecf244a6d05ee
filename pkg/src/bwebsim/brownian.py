"""Skeletons of coalescing Brownian motions.

Walkers start from an ordered list of space-time points and move on a time
grid of pitch ``h`` with exact Gaussian increments.  Two live walkers meet in
a step if their order swaps or, failing that, with the probability that the
Brownian bridge of their gap touches zero inside the step.  On meeting, the
walker with the higher index follows the lower-index survivor for ever.

Randomness is keyed by (walker index, grid step) and (pair, grid step), so the
skeleton of the first ``k`` points is exactly the prefix of the skeleton of
any longer list driven by the same seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import erf

from . import rng
from .geometry import Path, PathFamily
from .walks import ConfigError

_P_FLOOR = 2.0**-54


def theta(d, t):
    """Probability that two independent standard Brownian motions ``d`` apart have not met by ``t``.

    The gap diffuses at rate 2, so this is ``erf(d / (2 sqrt(t)))``.
    """
    d = np.asarray(d, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(d < 0):
        raise ValueError("theta needs d >= 0 and t > 0")
    out = erf(d / (2.0 * np.sqrt(t)))
    return float(out) if out.ndim == 0 else out


def pair_meeting_cdf(d: float, grid) -> np.ndarray:
    """CDF of the meeting time of two coalescing Brownian motions started ``d`` apart."""
    grid = np.asarray(grid, dtype=float)
    if not d > 0:
        raise ValueError("d must be positive")
    if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a nonempty increasing list of positive times")
    return 1.0 - theta(d, grid)


def bridge_meet_prob(d0: float, d1: float, h: float) -> float:
    """Chance that the gap bridge from ``d0`` to ``d1`` over a step ``h`` touches 0."""
    if not (d0 > 0 and d1 > 0 and h > 0):
        raise ValueError("bridge_meet_prob needs positive d0, d1 and h")
    return math.exp(-d0 * d1 / h)


@dataclass(frozen=True)
class SkeletonConfig:
    starting_set: tuple[tuple[float, float], ...]
    step: float
    horizon: float
    seed: int = 0
    bridge_correction: bool = True

    def __post_init__(self):
        pts = tuple((float(x), float(t)) for x, t in self.starting_set)
        object.__setattr__(self, "starting_set", pts)
        if not pts:
            raise ConfigError("starting set is empty")
        if len(set(pts)) != len(pts):
            raise ConfigError("starting points must be distinct")
        if not all(math.isfinite(x) and math.isfinite(t) for x, t in pts):
            raise ConfigError("starting points must be finite")
        if not self.step > 0:
            raise ConfigError("step must be positive")
        if not self.horizon > max(t for _, t in pts):
            raise ConfigError("horizon must lie beyond every start time")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def k(self) -> int:
        return len(self.starting_set)

    def grid_index(self, t: float) -> int:
        """Nearest grid step to time ``t`` (start times are snapped to the grid)."""
        return int(round(t / self.step))

    @property
    def end_index(self) -> int:
        return int(math.ceil(self.horizon / self.step - 1e-9))

    def arrays(self):
        x0 = np.array([p[0] for p in self.starting_set])
        m0 = np.array([self.grid_index(p[1]) for p in self.starting_set], dtype=np.int64)
        return x0, m0

    def prefix(self, k: int) -> "SkeletonConfig":
        return SkeletonConfig(self.starting_set[:k], self.step, self.horizon, self.seed, self.bridge_correction)

    def permuted(self, perm) -> "SkeletonConfig":
        perm = list(perm)
        if sorted(perm) != list(range(self.k)):
            raise ConfigError("permutation is not a bijection of the walker indices")
        pts = tuple(self.starting_set[i] for i in perm)
        return SkeletonConfig(pts, self.step, self.horizon, self.seed, self.bridge_correction)

    def with_seed(self, seed) -> "SkeletonConfig":
        return SkeletonConfig(self.starting_set, self.step, self.horizon, int(seed), self.bridge_correction)

    def to_json(self) -> dict:
        return {
            "starting_set": [list(p) for p in self.starting_set],
            "step": self.step,
            "horizon": self.horizon,
            "seed": int(self.seed),
            "bridge_correction": self.bridge_correction,
        }

    @classmethod
    def from_json(cls, obj) -> "SkeletonConfig":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            return cls(
                tuple(tuple(p) for p in obj["starting_set"]),
                float(obj["step"]),
                float(obj["horizon"]),
                int(obj.get("seed", 0)),
                bool(obj.get("bridge_correction", True)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed skeleton config: {exc}") from exc


@dataclass(frozen=True)
class CoalescenceRecord:
    pair: tuple[int, int]
    meet_time: float
    survivor: int

    def to_json(self) -> dict:
        return {"pair": list(self.pair), "meet_time": self.meet_time, "survivor": self.survivor}


@njit(cache=True, nogil=True)
def _root(parent, i):
    while parent[i] >= 0:
        i = parent[i]
    return i


@njit(cache=True, nogil=True)
def skeleton_kernel(seeds, x0, m0, h, obs_m, m_end, bridge):
    """Run one skeleton per seed.

    Returns ``pos`` (replicas, walkers, obs) with NaN before a walker's start,
    ``meet`` (replicas, walkers): grid time of absorption, NaN for survivors,
    and ``partner`` (replicas, walkers): the survivor each absorbed walker joined.
    """
    R = seeds.size
    W = x0.size
    n_obs = obs_m.size
    pos = np.full((R, W, n_obs), np.nan)
    meet = np.full((R, W), np.nan)
    partner = np.full((R, W), -1, np.int64)
    sq = math.sqrt(h)
    m_first = m0.min()
    x = np.empty(W)
    xo = np.empty(W)
    parent = np.empty(W, np.int64)
    active = np.empty(W, np.bool_)
    live = np.empty(W, np.bool_)
    for r in range(R):
        seed = seeds[r]
        x[:] = x0
        parent[:] = -1
        active[:] = False
        oi = 0
        while oi < n_obs and obs_m[oi] < m_first:
            oi += 1
        for m in range(m_first, m_end + 1):
            # activation, with immediate coalescence on an occupied point
            for w in range(W):
                if m0[w] != m:
                    continue
                active[w] = True
                for v in range(W):
                    if v == w or not active[v] or parent[v] >= 0:
                        continue
                    if x[v] == x0[w]:
                        lo = min(v, w)
                        hi = max(v, w)
                        parent[hi] = lo
                        meet[r, hi] = m
                        partner[r, hi] = lo
                        break
            while oi < n_obs and obs_m[oi] == m:
                for w in range(W):
                    if active[w]:
                        pos[r, w, oi] = x[_root(parent, w)]
                oi += 1
            if m == m_end:
                break
            for w in range(W):
                live[w] = active[w] and parent[w] < 0
                xo[w] = x[w]
                if live[w]:
                    x[w] += sq * rng.normal(seed, rng.TAG_BM, w, m, 0)
            for j in range(W):
                if not live[j]:
                    continue
                for i in range(j):
                    if not live[i]:
                        continue
                    a0 = xo[i] - xo[j]
                    a1 = x[i] - x[j]
                    met = a0 * a1 <= 0.0
                    if not met and bridge:
                        p = math.exp(-abs(a0) * abs(a1) / h)
                        if p > _P_FLOOR:
                            met = rng.uniform(seed, rng.TAG_BRIDGE, i, j, m) < p
                    if met:
                        s = _root(parent, i)
                        parent[j] = s
                        meet[r, j] = m + 0.5
                        partner[r, j] = s
                        break
    return pos, meet, partner


def _run(cfg: SkeletonConfig, seeds, obs_m):
    x0, m0 = cfg.arrays()
    return skeleton_kernel(
        np.asarray(seeds, dtype=np.uint64), x0, m0, float(cfg.step),
        np.asarray(obs_m, dtype=np.int64), np.int64(cfg.end_index), bool(cfg.bridge_correction),
    )


def sample_skeleton(cfg: SkeletonConfig):
    """Sample the skeleton once; returns ``(PathFamily, [CoalescenceRecord, ...])``.

    Paths are polygons on the grid, starting at the grid time nearest each
    requested start time.  Absorbed walkers share the survivor's knots exactly.
    """
    x0, m0 = cfg.arrays()
    m_end = cfg.end_index
    obs = np.arange(int(m0.min()), m_end + 1, dtype=np.int64)
    pos, meet, partner = _run(cfg, [cfg.seed], obs)
    paths = []
    for w in range(cfg.k):
        k0 = int(m0[w] - obs[0])
        times = obs[k0:] * cfg.step
        paths.append(Path.from_arrays(times, pos[0, w, k0:], start=float(times[0])))
    records = [
        CoalescenceRecord((int(partner[0, w]), w), float(meet[0, w]) * cfg.step, int(partner[0, w]))
        for w in range(cfg.k)
        if partner[0, w] >= 0
    ]
    records.sort(key=lambda rec: (rec.meet_time, rec.pair))
    return PathFamily(paths), records


def skeleton_values(cfg: SkeletonConfig, times, seeds) -> np.ndarray:
    """Walker positions at the given times for each replica seed (NaN before start)."""
    obs_m = np.array([cfg.grid_index(t) for t in times], dtype=np.int64)
    if np.any(np.diff(obs_m) < 0):
        raise ValueError("observation times must be increasing")
    if obs_m.size and obs_m[-1] > cfg.end_index:
        raise ValueError("observation time beyond the horizon")
    order = np.unique(obs_m, return_inverse=True)
    pos, _, _ = _run(cfg, seeds, order[0])
    return pos[:, :, order[1]]


def skeleton_meeting_times(cfg: SkeletonConfig, seeds) -> np.ndarray:
    """Absorption time of every walker per replica (NaN if it survives to the horizon)."""
    _, meet, _ = _run(cfg, seeds, np.zeros(0, np.int64))
    return meet * cfg.step


def dense_starting_set(k: int, x_range=(-1.0, 1.0), t_range=(0.0, 1.0)):
    """First ``k`` points of a deterministic low-discrepancy sequence in a box."""
    from scipy.stats import qmc

    pts = qmc.Halton(d=2, scramble=False).random(k + 1)[1:]
    xs = x_range[0] + pts[:, 0] * (x_range[1] - x_range[0])
    ts = t_range[0] + pts[:, 1] * (t_range[1] - t_range[0])
    return tuple(zip(xs.tolist(), ts.tolist()))
