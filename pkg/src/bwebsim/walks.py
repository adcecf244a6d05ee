"""Lattice systems of coalescing random walks.

Three kinds are supported:

``discrete_parity``
    Walkers on the even sublattice ``i + j even`` stepping ``+-1`` per unit
    time with a fair coin attached to every site.
``discrete_crossing``
    Walkers on all of Z^2 stepping by an arbitrary zero-mean integer law;
    linearly interpolated paths may cross but merge on a common site.
``continuous_time``
    Walkers driven by a rate-1 Poisson clock per site, one fair direction coin
    per clock event; the polygonal path runs from ``(i, T)`` to
    ``(i +- 1, T')`` where ``T'`` is the first event at the destination
    after ``T``.

All randomness is read from a field keyed by lattice coordinates, so two
walkers on the same site at the same time make the same move forever after.
Coalescence is never imposed; it happens because the field is shared.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit

from . import rng
from .geometry import Path, PathFamily

KINDS = ("discrete_parity", "continuous_time", "discrete_crossing")
MISSING = np.iinfo(np.int64).min


class ConfigError(ValueError):
    """Invalid system configuration or simulation request."""


class WindowOverflowError(RuntimeError):
    """A walker reached the edge of the declared spatial window."""


@dataclass(frozen=True)
class IncrementLaw:
    """Integer increment distribution with exact rational weights."""

    steps: tuple[int, ...]
    probs: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.steps) != len(self.probs) or not self.steps:
            raise ConfigError("increment law needs matching nonempty steps and probabilities")
        if len(set(self.steps)) != len(self.steps):
            raise ConfigError("increment steps must be distinct")
        if any(p <= 0 for p in self.probs):
            raise ConfigError("increment probabilities must be positive")
        if sum(self.probs) != 1:
            raise ConfigError("increment probabilities must sum to 1")
        if self.mean != 0:
            raise ConfigError(f"increment law must have mean 0 (got {self.mean})")
        if self.variance <= 0:
            raise ConfigError("increment law must have positive variance")

    @classmethod
    def simple(cls) -> "IncrementLaw":
        return cls((-1, 1), (Fraction(1, 2), Fraction(1, 2)))

    @classmethod
    def from_pairs(cls, pairs) -> "IncrementLaw":
        try:
            steps = tuple(int(s) for s, _ in pairs)
            probs = tuple(Fraction(str(p)) for _, p in pairs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed increment list: {exc}") from exc
        order = sorted(range(len(steps)), key=steps.__getitem__)
        return cls(tuple(steps[i] for i in order), tuple(probs[i] for i in order))

    @property
    def mean(self) -> Fraction:
        return sum(s * p for s, p in zip(self.steps, self.probs))

    @property
    def variance(self) -> Fraction:
        return sum(s * s * p for s, p in zip(self.steps, self.probs)) - self.mean**2

    @property
    def is_simple(self) -> bool:
        return self.steps == (-1, 1)

    def arrays(self):
        cdf = np.cumsum([float(p) for p in self.probs])
        cdf[-1] = 1.0
        return cdf, np.asarray(self.steps, dtype=np.int64)

    def to_pairs(self):
        return [[s, str(p)] for s, p in zip(self.steps, self.probs)]


@dataclass(frozen=True)
class Window:
    """Space x time box in lattice units; walkers may not reach the x edges."""

    x: tuple[int, int]
    t: tuple[float, float]

    def __post_init__(self):
        if not (self.x[0] < self.x[1] and self.t[0] <= self.t[1]):
            raise ConfigError("window bounds must satisfy lo < hi")

    @classmethod
    def around(cls, x_lo, x_hi, t_lo, t_hi, margin_sd=6.0, var=1.0) -> "Window":
        """Window wide enough that leaving it is a > ``margin_sd``-sigma event."""
        span = max(t_hi - t_lo, 1)
        pad = int(math.ceil(margin_sd * math.sqrt(var * span))) + 2
        return cls((int(math.floor(x_lo)) - pad, int(math.ceil(x_hi)) + pad), (t_lo, t_hi))


@dataclass(frozen=True)
class CoalescingSystem:
    kind: str
    window: Window
    delta: float = 1.0
    seed: int = 0
    law: IncrementLaw = field(default_factory=IncrementLaw.simple)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown system kind {self.kind!r}")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.kind != "discrete_crossing" and not self.law.is_simple:
            raise ConfigError(f"{self.kind} systems use +-1 increments only")

    @property
    def noncrossing(self) -> bool:
        return self.kind != "discrete_crossing"

    @property
    def coin_tag(self) -> int:
        return rng.TAG_COIN_PARITY if self.kind == "discrete_parity" else rng.TAG_COIN_CROSSING

    def with_seed(self, seed) -> "CoalescingSystem":
        return CoalescingSystem(self.kind, self.window, self.delta, int(seed), self.law)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "increments": self.law.to_pairs(),
            "delta": self.delta,
            "window": {"x": list(self.window.x), "t": list(self.window.t)},
            "seed": int(self.seed),
        }

    @classmethod
    def from_json(cls, obj) -> "CoalescingSystem":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            law = IncrementLaw.from_pairs(obj["increments"]) if "increments" in obj else IncrementLaw.simple()
            win = obj["window"]
            window = Window(tuple(int(v) for v in win["x"]), tuple(float(v) for v in win["t"]))
            return cls(obj["kind"], window, float(obj.get("delta", 1.0)), int(obj.get("seed", 0)), law)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed system config: {exc}") from exc


# ---------------------------------------------------------------------------
# compiled kernels


@njit(cache=True, nogil=True)
def _draw_step(seed, tag, cdf, steps, i, j):
    u = rng.uniform(seed, tag, i, j, 0)
    k = 0
    while k < cdf.size - 1 and u > cdf[k]:
        k += 1
    return steps[k]


@njit(cache=True, nogil=True)
def discrete_kernel(seeds, tag, cdf, steps, start_x, start_t, obs_t, x_lo, x_hi):
    """Positions at the sorted lattice times ``obs_t`` for every replica seed.

    Returns ``(pos, overflow)`` with ``pos`` shaped (replicas, walkers, obs);
    entries before a walker's start are ``MISSING``.
    """
    R = seeds.size
    W = start_x.size
    n_obs = obs_t.size
    out = np.full((R, W, n_obs), MISSING, np.int64)
    overflow = np.zeros(R, np.bool_)
    t_first = start_t.min()
    t_last = max(obs_t.max(), t_first)
    pos = np.empty(W, np.int64)
    active = np.zeros(W, np.bool_)
    for r in range(R):
        seed = seeds[r]
        pos[:] = start_x
        active[:] = False
        oi = 0
        for t in range(t_first, t_last + 1):
            for w in range(W):
                if start_t[w] == t:
                    active[w] = True
            while oi < n_obs and obs_t[oi] == t:
                for w in range(W):
                    if active[w]:
                        out[r, w, oi] = pos[w]
                oi += 1
            if t == t_last:
                break
            prev_site = MISSING
            prev_step = 0
            for w in range(W):
                if not active[w]:
                    continue
                if pos[w] != prev_site:
                    prev_site = pos[w]
                    prev_step = _draw_step(seed, tag, cdf, steps, pos[w], t)
                pos[w] += prev_step
                if pos[w] <= x_lo or pos[w] >= x_hi:
                    overflow[r] = True
    return out, overflow


@njit(cache=True, nogil=True)
def meeting_kernel(seeds, tag, cdf, steps, x_a, x_b, t0, n_max, x_lo, x_hi):
    """First lattice time (relative to ``t0``) at which two walkers share a site; -1 if none."""
    R = seeds.size
    out = np.full(R, -1, np.int64)
    overflow = np.zeros(R, np.bool_)
    for r in range(R):
        seed = seeds[r]
        a = x_a
        b = x_b
        for n in range(1, n_max + 1):
            t = t0 + n - 1
            a += _draw_step(seed, tag, cdf, steps, a, t)
            b += _draw_step(seed, tag, cdf, steps, b, t)
            if a <= x_lo or a >= x_hi or b <= x_lo or b >= x_hi:
                overflow[r] = True
                break
            if a == b:
                out[r] = n
                break
    return out, overflow


_CLOCK_CAP = 40


@njit(cache=True, nogil=True)
def _block_events(seed, site, block, buf):
    # Poisson(1) count by inverse cdf, then uniform placement inside [block, block+1)
    u = rng.uniform(seed, rng.TAG_CLOCK_COUNT, site, block, 0)
    n = 0
    p = math.exp(-1.0)
    c = p
    while u > c and n < _CLOCK_CAP - 1:
        n += 1
        p = p / n
        c += p
    for r in range(n):
        buf[r] = block + rng.uniform(seed, rng.TAG_CLOCK_TIME, site, block, r)
    buf[:n].sort()
    return n


@njit(cache=True, nogil=True)
def next_clock_event(seed, site, t, strict, buf):
    """First clock event at ``site`` after ``t`` (at or after if not strict) and its direction."""
    block = np.int64(math.floor(t))
    while True:
        n = _block_events(seed, site, block, buf)
        for r in range(n):
            if buf[r] > t or (not strict and buf[r] == t):
                u = rng.uniform(seed, rng.TAG_CLOCK_DIR, site, block, r)
                return buf[r], (1 if u >= 0.5 else -1)
        block += 1


@njit(cache=True, nogil=True)
def continuous_kernel(seeds, start_x, start_t, obs_t, x_lo, x_hi):
    """Polygonal path values at the sorted times ``obs_t``; NaN before a walker's start."""
    R = seeds.size
    W = start_x.size
    n_obs = obs_t.size
    out = np.full((R, W, n_obs), np.nan)
    overflow = np.zeros(R, np.bool_)
    buf = np.empty(_CLOCK_CAP)
    t_end = obs_t.max()
    for r in range(R):
        seed = seeds[r]
        for w in range(W):
            site = start_x[w]
            s0 = start_t[w]
            oi = 0
            while oi < n_obs and obs_t[oi] < s0:
                oi += 1
            if oi == n_obs:
                continue
            T, d = next_clock_event(seed, site, s0, False, buf)
            # constant segment (s0, site) -> (T, site)
            while oi < n_obs and obs_t[oi] <= T:
                out[r, w, oi] = site
                oi += 1
            t = T
            cur = site
            while oi < n_obs:
                nxt = cur + d
                if nxt <= x_lo or nxt >= x_hi:
                    overflow[r] = True
                    break
                T2, d2 = next_clock_event(seed, nxt, t, True, buf)
                while oi < n_obs and obs_t[oi] <= T2:
                    out[r, w, oi] = cur + (obs_t[oi] - t) / (T2 - t) * (nxt - cur)
                    oi += 1
                t = T2
                cur = nxt
                d = d2
                if t > t_end:
                    break
    return out, overflow


# ---------------------------------------------------------------------------
# randomness fields


class HashedCoinField:
    """Lazily materialized increment field of a discrete system."""

    def __init__(self, system: CoalescingSystem):
        self.seed = np.uint64(system.seed)
        self.tag = system.coin_tag
        self.cdf, self.steps = system.law.arrays()

    def increment(self, i: int, j: int) -> int:
        return int(_draw_step(self.seed, self.tag, self.cdf, self.steps, i, j))


class ScriptedCoinField:
    """Increments given explicitly per site; missing sites fall back to ``default``."""

    def __init__(self, coins: dict, default=None):
        self.coins = dict(coins)
        self.default = default

    def increment(self, i: int, j: int) -> int:
        if (i, j) in self.coins:
            return int(self.coins[(i, j)])
        if self.default is None:
            raise ConfigError(f"no scripted coin at site {(i, j)}")
        return self.default.increment(i, j) if hasattr(self.default, "increment") else int(self.default)


class HashedClockField:
    def __init__(self, system: CoalescingSystem):
        self.seed = np.uint64(system.seed)
        self._buf = np.empty(_CLOCK_CAP)

    def next_event(self, site: int, t: float, strict: bool = True):
        T, d = next_clock_event(self.seed, site, t, strict, self._buf)
        return float(T), int(d)


class ScriptedClockField:
    """Explicit event times per site; ``directions`` maps (site, time) -> +-1."""

    def __init__(self, events: dict, directions: dict, default_direction=None):
        self.events = {int(k): sorted(float(x) for x in v) for k, v in events.items()}
        self.directions = {(int(s), float(t)): int(d) for (s, t), d in directions.items()}
        self.default_direction = default_direction

    def next_event(self, site: int, t: float, strict: bool = True):
        times = self.events.get(site, [])
        k = bisect_right(times, t)
        if not strict and k > 0 and times[k - 1] == t:
            k -= 1
        if k >= len(times):
            raise ConfigError(f"clock at site {site} has no event after {t}; horizon outside sampled clock window")
        T = times[k]
        d = self.directions.get((site, T), self.default_direction)
        if d not in (1, -1):
            raise ConfigError(f"no direction scripted for event {(site, T)}")
        return T, d


# ---------------------------------------------------------------------------
# path builders


def _check_site(system: CoalescingSystem, x) -> None:
    if not system.window.x[0] < x < system.window.x[1]:
        raise WindowOverflowError(f"walker reached site {x} at the window edge {system.window.x}")


def _check_discrete_request(system, starts, horizon, kind):
    if system.kind != kind:
        raise ConfigError(f"expected a {kind} system, got {system.kind}")
    if int(horizon) != horizon:
        raise ConfigError("horizon must be an integer lattice time")
    t_lo, t_hi = system.window.t
    if horizon > t_hi:
        raise ConfigError(f"horizon {horizon} overflows the window time range {system.window.t}")
    out = []
    for i, j in starts:
        if int(i) != i or int(j) != j:
            raise ConfigError("discrete starts must be lattice points")
        i, j = int(i), int(j)
        if kind == "discrete_parity" and (i + j) % 2:
            raise ConfigError(f"start {(i, j)} violates the parity constraint i + j even")
        if not (system.window.x[0] < i < system.window.x[1] and t_lo <= j <= t_hi):
            raise ConfigError(f"start {(i, j)} lies outside the window")
        if j > horizon:
            raise ConfigError(f"start {(i, j)} is later than the horizon {horizon}")
        out.append((i, j))
    return out


def _lattice_paths(system, starts, horizon, coins):
    paths = []
    if coins is None:
        sx = np.array([s[0] for s in starts], np.int64)
        st = np.array([s[1] for s in starts], np.int64)
        t_first = int(st.min())
        obs = np.arange(t_first, horizon + 1, dtype=np.int64)
        cdf, steps = system.law.arrays()
        pos, overflow = discrete_kernel(
            np.array([system.seed], np.uint64), system.coin_tag, cdf, steps, sx, st, obs,
            system.window.x[0], system.window.x[1],
        )
        if overflow[0]:
            raise WindowOverflowError(f"a walker reached the window edge {system.window.x}")
        for w, (i0, j0) in enumerate(starts):
            k = j0 - t_first
            paths.append(Path.from_arrays(obs[k:].astype(float), pos[0, w, k:].astype(float)))
        return paths
    for i0, j0 in starts:
        xs = [i0]
        x = i0
        for j in range(j0, horizon):
            x += coins.increment(x, j)
            _check_site(system, x)
            xs.append(x)
        paths.append(Path.from_arrays(np.arange(j0, horizon + 1, dtype=float), np.asarray(xs, float)))
    return paths


def simulate_discrete(system: CoalescingSystem, starts, horizon: int, coins=None) -> PathFamily:
    """Coalescing walks on the even sublattice up to the absolute lattice time ``horizon``.

    ``coins`` overrides the hashed field (any object with ``increment(i, j)``).
    Paths are in lattice units; use :func:`rescale` for diffusive scaling.
    """
    starts = _check_discrete_request(system, starts, horizon, "discrete_parity")
    return PathFamily(_lattice_paths(system, starts, int(horizon), coins))


def simulate_crossing(system: CoalescingSystem, starts, horizon: int, coins=None) -> PathFamily:
    """Coalescing walks with a general increment law on all of Z^2."""
    starts = _check_discrete_request(system, starts, horizon, "discrete_crossing")
    return PathFamily(_lattice_paths(system, starts, int(horizon), coins))


def _continuous_path(system, clocks, site, s0, horizon, jump_now) -> Path:
    times = [s0]
    vals = [float(site)]
    T, d = clocks.next_event(site, s0, strict=not jump_now)
    if T >= horizon:
        if horizon > s0:
            times.append(horizon)
            vals.append(float(site))
        return Path.from_arrays(times, vals)
    if T > s0:
        times.append(T)
        vals.append(float(site))
    cur, t = site, T
    while True:
        nxt = cur + d
        _check_site(system, nxt)
        T2, d2 = clocks.next_event(nxt, t, strict=True)
        if T2 >= horizon:
            times.append(horizon)
            vals.append(cur + (horizon - t) / (T2 - t) * (nxt - cur))
            break
        times.append(T2)
        vals.append(float(nxt))
        cur, t, d = nxt, T2, d2
    return Path.from_arrays(times, vals)


def simulate_continuous(system: CoalescingSystem, starts, horizon: float, clocks=None) -> PathFamily:
    """Continuous-time coalescing walks from ``(site, time)`` starts up to ``horizon``.

    A start placed exactly on a clock event of its site yields two paths: one
    jumping immediately and one waiting for the next event.
    """
    if system.kind != "continuous_time":
        raise ConfigError(f"expected a continuous_time system, got {system.kind}")
    if not horizon > 0:
        raise ConfigError("horizon must be positive")
    t_lo, t_hi = system.window.t
    if not t_lo <= horizon <= t_hi:
        raise ConfigError(f"horizon {horizon} outside the sampled clock window {system.window.t}")
    clocks = clocks or HashedClockField(system)
    paths = []
    for site, s0 in starts:
        if int(site) != site:
            raise ConfigError("continuous-time starts need integer sites")
        site, s0 = int(site), float(s0)
        if not (system.window.x[0] < site < system.window.x[1] and t_lo <= s0 <= horizon):
            raise ConfigError(f"start {(site, s0)} lies outside the window")
        T, _ = clocks.next_event(site, s0, strict=False)
        if T == s0:
            paths.append(_continuous_path(system, clocks, site, s0, horizon, jump_now=True))
            paths.append(_continuous_path(system, clocks, site, s0, horizon, jump_now=False))
        else:
            paths.append(_continuous_path(system, clocks, site, s0, horizon, jump_now=False))
    return PathFamily(paths)


def rescale(K, delta: float) -> PathFamily:
    """Diffusive rescaling: space by ``delta``, time by ``delta**2``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    d2 = delta * delta
    out = []
    for p in K:
        if p.sentinel:
            out.append(Path.boundary(p.sentinel, p.start * d2 if math.isfinite(p.start) else p.start))
        else:
            out.append(Path.from_arrays(p.times * d2, p.values * delta, start=p.start * d2))
    return PathFamily(out, tol_dedup=getattr(K, "tol_dedup", 1e-12))


def boundary_paths(t_range=None) -> PathFamily:
    """Sentinel paths ``f == +-inf`` from ``-inf``, ``+inf`` and, optionally, each integer in ``t_range``."""
    starts = [-math.inf, math.inf]
    if t_range is not None:
        lo, hi = t_range
        starts[1:1] = [float(s) for s in range(math.ceil(lo), math.floor(hi) + 1)]
    return PathFamily(Path.boundary(sign, s) for s in starts for sign in (1, -1))
