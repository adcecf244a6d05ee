"""Counting functionals and event detectors on path families.

All functionals ignore sentinel paths.  A path "touches" ``(x, s)`` only when
``s`` is at or after its start time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Path


@dataclass(frozen=True)
class CountingQuery:
    t0: float
    t: float
    a: float
    b: float
    match_tol: float = 0.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if not self.a <= self.b:
            raise ValueError("need a <= b")
        if not self.match_tol >= 0:
            raise ValueError("match_tol must be nonnegative")

    def to_json(self) -> dict:
        return {"t0": self.t0, "t": self.t, "a": self.a, "b": self.b, "match_tol": self.match_tol}

    @classmethod
    def from_json(cls, obj) -> "CountingQuery":
        return cls(float(obj["t0"]), float(obj["t"]), float(obj["a"]), float(obj["b"]), float(obj.get("match_tol", 0.0)))


@dataclass(frozen=True)
class EventOQuery:
    a: float
    t0: float
    t: float
    eps: float
    eps_prime: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if not 0 < self.eps_prime < self.eps / 8:
            raise ValueError("need 0 < eps_prime < eps / 8")
        if not 0 <= self.delta < self.t / 2:
            raise ValueError("need 0 <= delta < t / 2")


@dataclass(frozen=True)
class RectEventQuery:
    x0: float
    t0: float
    u: float
    t: float

    def __post_init__(self):
        if not (self.u > 0 and self.t > 0):
            raise ValueError("u and t must be positive")


def _touching(K, q: CountingQuery):
    """(paths, values at t0, values at t0 + t) of regular paths touching [a, b] x {t0}."""
    out_p, out_x, out_y = [], [], []
    for p in K:
        if p.sentinel or p.start > q.t0:
            continue
        x = float(p.evaluate(q.t0))
        if q.a <= x <= q.b:
            out_p.append(p)
            out_x.append(x)
            out_y.append(float(p.evaluate(q.t0 + q.t)))
    return out_p, np.asarray(out_x), np.asarray(out_y)


def _classes(values: np.ndarray, tol: float) -> np.ndarray:
    """Label values by single-linkage grouping at ``tol``; labels follow sorted order."""
    if values.size == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(values, kind="stable")
    gaps = np.diff(values[order]) > tol
    sorted_labels = np.concatenate([[0], np.cumsum(gaps)])
    labels = np.empty_like(sorted_labels)
    labels[order] = sorted_labels
    return labels


def _representatives(values, labels) -> list[float]:
    reps = {}
    for v, lab in zip(values.tolist(), labels.tolist()):
        reps[lab] = min(v, reps.get(lab, math.inf))
    return [reps[k] for k in sorted(reps)]


def eta(K, q: CountingQuery) -> int:
    """Number of distinct arrival positions at ``t0 + t`` of paths through ``[a, b] x {t0}``."""
    _, _, y = _touching(K, q)
    if y.size == 0:
        return 0
    return int(_classes(y, q.match_tol).max()) + 1


def eta_hat(K, q: CountingQuery) -> int:
    return max(eta(K, q) - 1, 0)


def n_set(K, q: CountingQuery) -> frozenset:
    """Arrival positions (one representative, the smallest, per class)."""
    _, _, y = _touching(K, q)
    return frozenset(_representatives(y, _classes(y, q.match_tol)))


def l_r_endpoints(K, q: CountingQuery) -> tuple[float, float]:
    """Leftmost and rightmost touched points of ``[a, b]``; ``(inf, -inf)`` when nothing touches."""
    _, x, _ = _touching(K, q)
    if x.size == 0:
        return math.inf, -math.inf
    return float(x.min()), float(x.max())


def n_plus_minus(K, q: CountingQuery) -> tuple[frozenset, frozenset]:
    """``(N-, N+)``: arrivals of paths through the leftmost and the rightmost touched point."""
    _, x, y = _touching(K, q)
    if x.size == 0:
        return frozenset(), frozenset()
    labels = _classes(y, q.match_tol)
    reps = _representatives(y, labels)
    lo, hi = x.min(), x.max()
    n_minus = frozenset(reps[k] for k in np.unique(labels[np.abs(x - lo) <= q.match_tol]))
    n_plus = frozenset(reps[k] for k in np.unique(labels[np.abs(x - hi) <= q.match_tol]))
    return n_minus, n_plus


def detect_O(K, q: EventOQuery) -> bool:
    """Three paths near ``a - eps``, inside, and near ``a + eps`` at ``t0 + delta``, middle arriving apart."""
    s = q.t0 + q.delta
    e, ep = q.eps, q.eps_prime
    bands = (
        (q.a - e - ep, q.a - e + ep),
        (q.a - e + 2 * ep, q.a + e - 2 * ep),
        (q.a + e - ep, q.a + e + ep),
    )
    arrivals = ([], [], [])
    for p in K:
        if p.sentinel or not p.start < s:
            continue
        x = float(p.evaluate(s))
        for k, (lo, hi) in enumerate(bands):
            if lo < x < hi:
                arrivals[k].append(float(p.evaluate(q.t0 + q.t)))
    left, mid, right = (set(v) for v in arrivals)
    if not (left and mid and right):
        return False
    return any((left - {m}) and (right - {m}) for m in mid)


def _knots_between(p: Path, lo: float, hi: float) -> np.ndarray:
    k = p.times[(p.times > lo) & (p.times < hi)]
    return np.concatenate([[lo], k, [hi]])


def _first_entry(p: Path, lo_t: float, hi_t: float, lo_x: float, hi_x: float):
    """Earliest time in ``[lo_t, hi_t]`` at which ``p`` lies in ``[lo_x, hi_x]``, or None."""
    if lo_t > hi_t:
        return None
    ts = _knots_between(p, lo_t, hi_t)
    xs = p.evaluate(ts)
    if lo_x <= xs[0] <= hi_x:
        return float(ts[0])
    for k in range(ts.size - 1):
        x0, x1 = xs[k], xs[k + 1]
        target = lo_x if x0 < lo_x else hi_x
        if (x0 - target) * (x1 - target) <= 0 and x1 != x0:
            return float(ts[k] + (target - x0) / (x1 - x0) * (ts[k + 1] - ts[k]))
    return None


def detect_A(K, q: RectEventQuery) -> bool:
    """Some path enters the small rectangle and later reaches a side of the big one."""
    inner = q.u / 4
    for p in K:
        if p.sentinel:
            continue
        tau = _first_entry(p, max(q.t0, p.start), q.t0 + q.t, q.x0 - inner, q.x0 + inner)
        if tau is None:
            continue
        ts = _knots_between(p, tau, q.t0 + 2 * q.t)
        if np.max(np.abs(p.evaluate(ts) - q.x0)) >= q.u / 2:
            return True
    return False


def _window_oscillation(p: Path, s: float, t: float) -> float:
    ts = _knots_between(p, s, s + t)
    return float(np.max(np.abs(p.evaluate(ts) - p.evaluate(s))))


def detect_B(K, q: RectEventQuery) -> bool:
    """Some path through the small rectangle moves by ``u`` within time ``t`` afterwards.

    For a polygon the window oscillation is piecewise linear in the window
    start, with breakpoints at the knots and the knots shifted back by ``t``;
    together with the band crossings these candidates make the check exact.
    """
    inner = q.u / 4
    lo_x, hi_x = q.x0 - inner, q.x0 + inner
    for p in K:
        if p.sentinel:
            continue
        lo_t, hi_t = max(q.t0, p.start), q.t0 + q.t
        if lo_t > hi_t:
            continue
        cand = np.concatenate([p.times, p.times - q.t, [lo_t, hi_t]])
        cand = cand[(cand >= lo_t) & (cand <= hi_t)]
        # times where the path crosses the band edges
        ts = _knots_between(p, lo_t, hi_t)
        xs = p.evaluate(ts)
        for edge in (lo_x, hi_x):
            d = xs - edge
            idx = np.nonzero(d[:-1] * d[1:] < 0)[0]
            cand = np.concatenate([cand, ts[idx] - d[idx] * (ts[idx + 1] - ts[idx]) / (d[idx + 1] - d[idx])])
        vals = p.evaluate(cand)
        cand = cand[(vals >= lo_x) & (vals <= hi_x)]
        for s in np.unique(cand):
            if _window_oscillation(p, float(s), q.t) >= q.u:
                return True
    return False
