"""Compactified space-time, path space and the Hausdorff metric on path sets.

Points ``(x, t)`` of the extended plane are mapped to the bounded square by

    phi(x, t) = tanh(x) / (1 + |t|),    psi(t) = tanh(t),

and every distance in this module is measured in those coordinates.  Paths
are polygonal: a start time plus a list of ``(time, value)`` knots.  Before
its start a path is extended by its starting value (this "hatted" extension
is used only by the metric); after its last knot it is held constant.

Infinite values appear only in sentinel paths ``f == +inf`` or ``f == -inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TOL = 1e-9
DEFAULT_DEDUP_TOL = 1e-12

INF = math.inf


def phi(x, t):
    """Spatial compactification ``tanh(x) / (1 + |t|)``; total on extended reals."""
    return float(np.tanh(x) / (1.0 + abs(t)))


def psi(t):
    """Temporal compactification ``tanh(t)``."""
    return float(np.tanh(t))


@dataclass(frozen=True)
class SpaceTimePoint:
    x: float
    t: float

    def image(self):
        return phi(self.x, self.t), psi(self.t)


def rho(p: SpaceTimePoint, q: SpaceTimePoint) -> float:
    """Distance between two points of the compactified plane."""
    return max(abs(phi(p.x, p.t) - phi(q.x, q.t)), abs(psi(p.t) - psi(q.t)))


def _parse_ext(v) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("+inf", "inf", "+infinity", "infinity"):
            return INF
        if s in ("-inf", "-infinity"):
            return -INF
        raise ValueError(f"not an extended real: {v!r}")
    return float(v)


def _format_ext(v: float):
    if v == INF:
        return "+inf"
    if v == -INF:
        return "-inf"
    return v


@dataclass(frozen=True, eq=False)
class Path:
    """A polygonal path with an explicit start time.

    Use :meth:`from_knots`, :meth:`constant` or :meth:`boundary` rather than
    the raw constructor; they validate the knot list.
    """

    start: float
    times: np.ndarray
    values: np.ndarray
    sentinel: int = 0
    _key: bytes = field(default=b"", repr=False)

    @classmethod
    def from_knots(cls, knots, start=None) -> "Path":
        arr = np.asarray(knots, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
            raise ValueError("knots must be a nonempty list of (time, value) pairs")
        times = np.ascontiguousarray(arr[:, 0])
        values = np.ascontiguousarray(arr[:, 1])
        return cls._build(times[0] if start is None else float(start), times, values)

    @classmethod
    def from_arrays(cls, times, values, start=None) -> "Path":
        times = np.ascontiguousarray(times, dtype=float)
        values = np.ascontiguousarray(values, dtype=float)
        if times.shape != values.shape or times.ndim != 1 or times.size == 0:
            raise ValueError("times and values must be equal-length nonempty 1-d arrays")
        return cls._build(times[0] if start is None else float(start), times, values)

    @classmethod
    def constant(cls, x: float, start: float) -> "Path":
        return cls._build(float(start), np.array([float(start)]), np.array([float(x)]))

    @classmethod
    def boundary(cls, sign: int, start: float) -> "Path":
        """The sentinel path ``f == sign * inf`` started at ``start``."""
        if sign not in (1, -1):
            raise ValueError("sentinel sign must be +1 or -1")
        start = float(start)
        empty = np.empty(0)
        empty.flags.writeable = False
        key = b"S" + np.array([sign, start]).tobytes()
        return cls(start, empty, empty, sign, key)

    @classmethod
    def _build(cls, start, times, values) -> "Path":
        if not math.isfinite(start):
            raise ValueError("non-sentinel paths need a finite start time")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValueError("knot times and values must be finite")
        if times[0] != start:
            raise ValueError("first knot time must equal the start time")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("knot times must be strictly increasing")
        times = times.copy()
        values = values.copy()
        times.flags.writeable = False
        values.flags.writeable = False
        key = b"P" + times.tobytes() + b"|" + values.tobytes()
        return cls(start, times, values, 0, key)

    @property
    def is_sentinel(self) -> bool:
        return self.sentinel != 0

    @property
    def knots(self):
        return list(zip(self.times.tolist(), self.values.tolist()))

    def __eq__(self, other):
        return isinstance(other, Path) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __call__(self, t):
        return path_eval(self, t)

    def evaluate(self, t) -> np.ndarray:
        """Vectorized hatted evaluation."""
        t = np.asarray(t, dtype=float)
        if self.sentinel:
            return np.full(t.shape, self.sentinel * INF)
        return np.interp(t, self.times, self.values)

    def tanh_values(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.sentinel:
            return np.full(t.shape, float(self.sentinel))
        return np.tanh(np.interp(t, self.times, self.values))

    def to_json(self) -> dict:
        return {
            "start": _format_ext(self.start),
            "knots": [[t, x] for t, x in self.knots],
            "sentinel": {0: "none", 1: "+inf", -1: "-inf"}[self.sentinel],
        }

    @classmethod
    def from_json(cls, obj) -> "Path":
        try:
            sentinel = {"none": 0, "+inf": 1, "-inf": -1}[obj.get("sentinel", "none")]
            start = _parse_ext(obj["start"])
        except (KeyError, AttributeError, TypeError) as exc:
            raise ValueError(f"malformed path object: {exc}") from exc
        if sentinel:
            if obj.get("knots"):
                raise ValueError("sentinel paths carry no knots")
            return cls.boundary(sentinel, start)
        return cls.from_knots(obj["knots"], start=start)


def path_eval(p: Path, t: float) -> float:
    """Value of the hatted path at time ``t``."""
    if p.sentinel:
        return p.sentinel * INF
    if t == INF:
        return float(p.values[-1])
    if t == -INF:
        return float(p.values[0])
    return float(np.interp(t, p.times, p.values))


def _gap(p: Path, q: Path, t: np.ndarray) -> np.ndarray:
    return np.abs(p.tanh_values(t) - q.tanh_values(t)) / (1.0 + np.abs(t))


def _slopes(p: Path, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    if p.sentinel:
        return np.zeros_like(lo)
    return (np.interp(hi, p.times, p.values) - np.interp(lo, p.times, p.values)) / (hi - lo)


_SECH2_LIP = 0.7699  # max |d/dx sech(x)^2| = 4 sqrt(3) / 9


def _sup_sech2(a, b):
    """Largest sech^2 along the segment from ``a`` to ``b``."""
    m = np.where(a * b <= 0, 0.0, np.minimum(np.abs(a), np.abs(b)))
    return 1.0 / np.cosh(np.minimum(m, 350.0)) ** 2


def _interval_bound(p: Path, q: Path, lo, hi, sp, sq):
    """Upper bound of the gap on each [lo, hi]; both paths are linear there."""
    dlo = p.tanh_values(lo) - q.tanh_values(lo)
    dhi = p.tanh_values(hi) - q.tanh_values(hi)
    if p.sentinel and q.sentinel:
        lip = np.zeros_like(lo)
    elif p.sentinel:
        lip = np.abs(sq)
    elif q.sentinel:
        lip = np.abs(sp)
    else:
        # D' = sech2(f)(f' - g') + g'(sech2(f) - sech2(g)), and symmetrically in g
        plo, phi_ = np.interp(lo, p.times, p.values), np.interp(hi, p.times, p.values)
        qlo, qhi = np.interp(lo, q.times, q.values), np.interp(hi, q.times, q.values)
        s_f, s_g = _sup_sech2(plo, phi_), _sup_sech2(qlo, qhi)
        md = np.maximum(np.abs(plo - qlo), np.abs(phi_ - qhi))
        ds = np.minimum(_SECH2_LIP * md, np.maximum(s_f, s_g))
        dv = np.abs(sp - sq)
        lip = np.minimum(s_f * dv + np.abs(sq) * ds, s_g * dv + np.abs(sp) * ds)
    # |D| is lip-Lipschitz; the weight 1/(1+|t|) is monotone since 0 is a breakpoint
    w = 1.0 / (1.0 + np.minimum(np.abs(lo), np.abs(hi)))
    return 0.5 * (np.abs(dlo) + np.abs(dhi) + lip * (hi - lo)) * w


_MAX_INTERVALS = 1 << 18


def path_metric(p: Path, q: Path, tol: float = DEFAULT_TOL) -> float:
    """Distance between two paths, accurate to within ``tol``.

    The spatial term is a supremum over all times of the gap between the
    compactified hatted trajectories.  Outside the knot range both paths are
    constant and the gap decays in ``|t|``, so the supremum there sits on a
    breakpoint.  Between breakpoints (knot times of either path, plus 0) both
    paths are linear and the gap is maximized by branch and bound.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    start_gap = abs(psi(p.start) - psi(q.start))
    if p == q:
        return 0.0
    bp = np.union1d(np.union1d(p.times, q.times), [0.0])
    best = max(start_gap, float(_gap(p, q, bp).max()))
    if bp.size < 2:
        return best
    lo, hi = bp[:-1], bp[1:]
    sp, sq = _slopes(p, lo, hi), _slopes(q, lo, hi)
    while lo.size:
        bound = _interval_bound(p, q, lo, hi, sp, sq)
        keep = (bound > best + tol) & (hi - lo > 1e-15 * np.maximum(1.0, np.abs(lo)))
        if not keep.any() or keep.sum() > _MAX_INTERVALS:
            break
        lo, hi, sp, sq = lo[keep], hi[keep], sp[keep], sq[keep]
        mid = 0.5 * (lo + hi)
        best = max(best, float(_gap(p, q, mid).max()))
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        sp, sq = np.concatenate([sp, sp]), np.concatenate([sq, sq])
    return best


def _quick_lower_bound(p: Path, q: Path) -> float:
    lb = abs(psi(p.start) - psi(q.start))
    probe = []
    for r in (p, q):
        if not r.sentinel:
            probe.extend((r.times[0], r.times[-1]))
    probe.append(0.0)
    return max(lb, float(_gap(p, q, np.asarray(probe)).max()))


class PathFamily(Sequence):
    """Finite set of paths, deduplicated under the path metric.

    A path within ``tol_dedup`` of one already stored is dropped (the first
    one wins), so insertion order matters only for which representative is
    kept.
    """

    def __init__(self, paths: Iterable[Path] = (), tol_dedup: float = DEFAULT_DEDUP_TOL):
        self.tol_dedup = tol_dedup
        self._paths: list[Path] = []
        self._seen: set[Path] = set()
        for p in paths:
            self.add(p)

    def add(self, p: Path) -> bool:
        if p in self._seen:
            return False
        for q in self._paths if self.tol_dedup > 0 else ():
            if _quick_lower_bound(p, q) <= self.tol_dedup and path_metric(p, q, self.tol_dedup / 2) <= self.tol_dedup:
                return False
        self._paths.append(p)
        self._seen.add(p)
        return True

    def __getitem__(self, i):
        return self._paths[i]

    def __len__(self):
        return len(self._paths)

    def __contains__(self, p):
        return p in self._seen

    def __repr__(self):
        return f"PathFamily({len(self)} paths)"

    @property
    def paths(self) -> list[Path]:
        return list(self._paths)

    def regular(self) -> list[Path]:
        """The non-sentinel paths."""
        return [p for p in self._paths if not p.sentinel]

    def to_json(self) -> list:
        return [p.to_json() for p in self._paths]

    @classmethod
    def from_json(cls, obj, tol_dedup: float = DEFAULT_DEDUP_TOL) -> "PathFamily":
        if not isinstance(obj, list):
            raise ValueError("a path family is a JSON array of paths")
        return cls((Path.from_json(o) for o in obj), tol_dedup=tol_dedup)


def _directed(A: Sequence[Path], B: Sequence[Path], tol: float) -> float:
    # early-break sup-inf: stop scanning B once the inner min cannot raise the sup
    Bset = set(B)
    worst = 0.0
    for a in A:
        if a in Bset:
            continue
        inner = INF
        for b in B:
            if _quick_lower_bound(a, b) >= inner:
                continue
            inner = min(inner, path_metric(a, b, tol))
            if inner <= worst:
                break
        worst = max(worst, inner)
    return worst


def hausdorff(A: Sequence[Path], B: Sequence[Path], tol: float = DEFAULT_TOL) -> float:
    """Hausdorff distance between two nonempty path families."""
    if len(A) == 0 or len(B) == 0:
        raise ValueError("Hausdorff distance needs nonempty families")
    if not tol > 0:
        raise ValueError("tol must be positive")
    return max(_directed(A, B, tol), _directed(B, A, tol))


def path_touches(p: Path, x: float, s: float, tol: float = 0.0) -> bool:
    """True iff the path is alive at time ``s`` and passes within ``tol`` of ``x``."""
    if p.start > s:
        return False
    return abs(path_eval(p, s) - x) <= tol


@dataclass(frozen=True)
class Segment:
    lo: float
    hi: float
    time: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("segment needs lo <= hi")

    def contains(self, x: float) -> bool:
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above and below


@dataclass(frozen=True)
class SegmentQuery:
    """A cylinder event: some path goes through every segment.

    ``start_constraint`` is ``None``, ``("strict", t0)`` or ``("weak", t0)``.
    """

    segments: tuple[Segment, ...]
    start_constraint: tuple[str, float] | None = None

    def __post_init__(self):
        if self.start_constraint is not None and self.start_constraint[0] not in ("strict", "weak"):
            raise ValueError("start constraint must be 'strict' or 'weak'")


def _path_matches(p: Path, q: SegmentQuery) -> bool:
    if q.start_constraint is not None:
        kind, t0 = q.start_constraint
        if kind == "strict" and not p.start > t0:
            return False
        if kind == "weak" and not p.start >= t0:
            return False
    for seg in q.segments:
        if p.start > seg.time or not seg.contains(path_eval(p, seg.time)):
            return False
    return True


def cylinder_match(K: Iterable[Path], q: SegmentQuery) -> bool:
    return any(_path_matches(p, q) for p in K)
