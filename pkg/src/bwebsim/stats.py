"""Monte Carlo estimators and hypothesis checks.

Every estimator takes a *model*, either a lattice :class:`CoalescingSystem`
(space scaled by ``delta``, time by ``delta**2``) or a :class:`SkeletonConfig`,
draws ``replicas`` independent realizations from seeds derived from the
model's seed, and returns :class:`EstimateReport` rows.

Lattice counts use the shared-field property: every path through a lattice
site agrees from then on with the walker started at that site, so the paths
touching ``[a, b] x {t0}`` are represented by walkers started at every
admissible site of ``[a, b]`` at time ``t0``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps

from . import rng
from .brownian import SkeletonConfig, pair_meeting_cdf, skeleton_values, theta
from .counting import CountingQuery
from .parallel import map_replicas
from .walks import (
    MISSING,
    CoalescingSystem,
    ConfigError,
    IncrementLaw,
    Window,
    WindowOverflowError,
    continuous_kernel,
    discrete_kernel,
    meeting_kernel,
)

VERDICTS = ("pass", "fail", "informational", "not_applicable")
RELATIONS = ("", "eq", "le", "gt", "ci_below")

CSV_FIELDS = (
    "name", "x", "estimate", "std_error", "target", "tolerance", "relation",
    "verdict", "replicas", "seed", "config_digest", "note",
)


@dataclass(frozen=True)
class EstimateReport:
    """One Monte Carlo estimate and its verdict.

    ``relation`` fixes how ``estimate`` is compared with ``target``:
    ``eq`` is ``|estimate - target| <= tolerance``, ``le`` is
    ``estimate <= target + tolerance``, ``gt`` is ``estimate > target`` and
    ``ci_below`` is ``estimate + tolerance < target``.  ``x`` is the abscissa
    when the report is one point of a curve.
    """

    name: str
    estimate: float
    std_error: float
    replicas: int
    target: float | None
    tolerance: float
    verdict: str
    seed: int
    config_digest: str
    relation: str = ""
    x: float | None = None
    note: str = ""

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.relation not in RELATIONS:
            raise ValueError(f"bad relation {self.relation!r}")
        if not (self.std_error >= 0 or math.isnan(self.std_error)):
            raise ValueError("std_error must be nonnegative")

    @property
    def passed(self) -> bool:
        return self.verdict in ("pass", "informational", "not_applicable")

    def row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in CSV_FIELDS}


def judge(estimate, target, tolerance, relation) -> str:
    if target is None or relation == "":
        return "informational"
    if relation == "eq":
        ok = abs(estimate - target) <= tolerance
    elif relation == "le":
        ok = estimate <= target + tolerance
    elif relation == "gt":
        ok = estimate > target
    elif relation == "ci_below":
        ok = estimate + tolerance < target
    else:
        raise ValueError(relation)
    return "pass" if ok else "fail"


def config_digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _report(name, estimate, se, replicas, target, tolerance, relation, model, params, x=None, note=""):
    estimate = float(estimate)
    target = None if target is None else float(target)
    return EstimateReport(
        name=name,
        estimate=estimate,
        std_error=float(se),
        replicas=int(replicas),
        target=target,
        tolerance=float(tolerance),
        verdict=judge(estimate, target, tolerance, relation),
        seed=int(model.seed),
        config_digest=config_digest({"check": name, "model": model.to_json(), "params": params}),
        relation=relation,
        x=None if x is None else float(x),
        note=note,
    )


def _mean_se(samples: np.ndarray):
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


# ---------------------------------------------------------------------------
# models


def lattice_system(kind="discrete_parity", delta=0.02, seed=0, law: IncrementLaw | None = None) -> CoalescingSystem:
    """A system for the estimators; they size their own windows, so this one is nominal."""
    law = law or IncrementLaw.simple()
    return CoalescingSystem(kind, Window((-(2**40), 2**40), (-1e15, 1e15)), delta, seed, law)


def _is_skeleton(model) -> bool:
    return isinstance(model, SkeletonConfig)


def _lattice_index(x: float) -> int:
    r = round(x)
    if abs(x - r) > 1e-6 * max(1.0, abs(x)):
        raise ConfigError(f"time {x} (lattice units) is not a lattice time; choose t0 as a multiple of delta^2")
    return int(r)


def _start_lattice_time(system: CoalescingSystem, t0: float) -> float:
    j = t0 / system.delta**2
    return j if system.kind == "continuous_time" else _lattice_index(j)


def _sites(system: CoalescingSystem, lo: float, hi: float, j0) -> np.ndarray:
    """Admissible lattice sites ``i`` with ``lo <= delta * i <= hi`` at lattice time ``j0``."""
    d = system.delta
    i_lo = math.ceil(lo / d - 1e-9)
    i_hi = math.floor(hi / d + 1e-9)
    sites = np.arange(i_lo, i_hi + 1, dtype=np.int64)
    if system.kind == "discrete_parity":
        sites = sites[(sites + int(j0)) % 2 == 0]
    return sites


def _anchor(system: CoalescingSystem, a: float, j0) -> int:
    """Smallest admissible site at or right of ``a``."""
    i = math.ceil(a / system.delta - 1e-9)
    if system.kind == "discrete_parity" and (i + int(j0)) % 2:
        i += 1
    return i


def _pitch(system: CoalescingSystem) -> int:
    return 2 if system.kind == "discrete_parity" else 1


def _window_for(system, x_lo, x_hi, span) -> tuple[int, int]:
    smax = max(abs(s) for s in system.law.steps)
    pad = int(math.ceil(6.0 * math.sqrt(float(system.law.variance) * max(span, 1.0)))) + 2 * smax + 2
    return int(x_lo) - pad, int(x_hi) + pad


def _lattice_values(system, start_x, start_t, obs, seeds, workers) -> np.ndarray:
    """Rescaled walker values (replicas, walkers, obs); NaN before a walker's start.

    ``start_t`` and ``obs`` are in lattice time units.
    """
    start_x = np.asarray(start_x, dtype=np.int64)
    obs = np.asarray(obs)
    span = float(np.max(obs) - np.min(start_t))
    x_lo, x_hi = _window_for(system, start_x.min(), start_x.max(), span)
    d = system.delta
    if system.kind == "continuous_time":
        st = np.asarray(start_t, dtype=float) * np.ones(start_x.size)
        o = obs.astype(float)

        def run(s):
            vals, over = continuous_kernel(s, start_x, st, o, x_lo, x_hi)
            if over.any():
                raise WindowOverflowError("walker left the estimator window")
            return vals * d

    else:
        st = np.asarray(start_t, dtype=np.int64) * np.ones(start_x.size, dtype=np.int64)
        o = obs.astype(np.int64)
        cdf, steps = system.law.arrays()
        tag = system.coin_tag

        def run(s):
            pos, over = discrete_kernel(s, tag, cdf, steps, start_x, st, o, x_lo, x_hi)
            if over.any():
                raise WindowOverflowError("walker left the estimator window")
            vals = pos.astype(float)
            vals[pos == MISSING] = np.nan
            return vals * d

    return map_replicas(run, seeds, workers)


def _obs_lattice(system, times) -> np.ndarray:
    """Rescaled absolute times to lattice times (rounded to integers for discrete kinds)."""
    lt = np.asarray(times, dtype=float) / system.delta**2
    if system.kind == "continuous_time":
        return lt
    return np.rint(lt).astype(np.int64)


def _count_distinct(V: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Distinct non-NaN values per row of ``V`` (single-linkage at ``tol``)."""
    if V.shape[1] == 0:
        return np.zeros(V.shape[0], dtype=np.int64)
    S = np.sort(V, axis=1)
    valid = ~np.isnan(S)
    with np.errstate(invalid="ignore"):
        new = (np.diff(S, axis=1) > tol) & valid[:, 1:]
    n = valid.sum(axis=1)
    return np.where(n > 0, 1 + new.sum(axis=1), 0).astype(np.int64)


def _seeds(model, replicas, start=0):
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    return rng.replica_seeds(model.seed, replicas, start=start)


def eta_samples(model, q: CountingQuery, replicas: int, t_list=None, workers: int = 1, seeds=None) -> np.ndarray:
    """Samples of eta(t0, t; a, b), shape (replicas, len(t_list)); ``t_list`` defaults to ``[q.t]``."""
    ts = np.asarray([q.t] if t_list is None else t_list, dtype=float)
    if np.any(ts <= 0) or np.any(np.diff(ts) <= 0):
        raise ValueError("t_list must be increasing and positive")
    seeds = _seeds(model, replicas) if seeds is None else np.asarray(seeds, dtype=np.uint64)
    if _is_skeleton(model):
        times = np.concatenate([[q.t0], q.t0 + ts])
        V = map_replicas(lambda s: skeleton_values(model, times, s), seeds, workers)
        x0 = V[:, :, 0]
        with np.errstate(invalid="ignore"):
            touch = (x0 >= q.a) & (x0 <= q.b)
        return np.stack([_count_distinct(np.where(touch, V[:, :, k + 1], np.nan), q.match_tol) for k in range(ts.size)], axis=1)
    j0 = _start_lattice_time(model, q.t0)
    sites = _sites(model, q.a, q.b, j0)
    if sites.size == 0:
        return np.zeros((seeds.size, ts.size), dtype=np.int64)
    V = _lattice_values(model, sites, j0, _obs_lattice(model, q.t0 + ts), seeds, workers)
    return np.stack([_count_distinct(V[:, :, k], q.match_tol) for k in range(ts.size)], axis=1)


def _q_params(q: CountingQuery) -> dict:
    return q.to_json()


def dual_count_samples(system: CoalescingSystem, q: CountingQuery, replicas: int, workers: int = 1,
                       reach: float = 8.0) -> np.ndarray:
    """Distinct occupied points of ``[a, b]`` at ``t0 + t`` for walkers started from every site at ``t0``.

    Sites farther than ``reach * sqrt(t)`` from the interval are left out.
    """
    if _is_skeleton(system):
        raise ConfigError("dual counts need a lattice system")
    j0 = _start_lattice_time(system, q.t0)
    pad = reach * math.sqrt(q.t)
    sites = _sites(system, q.a - pad, q.b + pad, j0)
    V = _lattice_values(system, sites, j0, _obs_lattice(system, [q.t0 + q.t]), _seeds(system, replicas), workers)[:, :, 0]
    with np.errstate(invalid="ignore"):
        inside = (V >= q.a - 1e-12) & (V <= q.b + 1e-12)
    return _count_distinct(np.where(inside, V, np.nan), q.match_tol)


def est_duality(system: CoalescingSystem, q: CountingQuery, replicas: int = 2000, workers: int = 1) -> EstimateReport:
    """Informational two-sample KS between eta_hat and the dual count on the same query."""
    fwd = np.maximum(eta_samples(system, q, replicas, workers=workers)[:, 0] - 1, 0)
    dual = dual_count_samples(system, q, replicas, workers)
    res = sps.ks_2samp(fwd, dual)
    return _report("duality_ks", res.statistic, 0.0, replicas, None, 0.0, "", system, _q_params(q),
                   note=f"p-value {res.pvalue:.4g}; means {fwd.mean():.4f} vs {dual.mean():.4f}")


# ---------------------------------------------------------------------------
# expectation and tail bounds


def eta_mean_target(a, b, t) -> float:
    return 1.0 + (b - a) / math.sqrt(math.pi * t)


def est_eta_mean(model, q: CountingQuery, replicas: int = 2000, workers: int = 1, rel_tol: float = 0.05,
                 target: float | None = None) -> EstimateReport:
    """Mean of eta against ``1 + (b - a) / sqrt(pi t)`` (or an explicit ``target``).

    Tolerance is ``max(3 SE, rel_tol * target)``.
    """
    if replicas < 100:
        raise ValueError("est_eta_mean needs at least 100 replicas")
    eta = eta_samples(model, q, replicas, workers=workers)[:, 0]
    mean, se = _mean_se(eta)
    target = eta_mean_target(q.a, q.b, q.t) if target is None else float(target)
    tol = max(3 * se, rel_tol * abs(target))
    return _report("eta_mean", mean, se, replicas, target, tol, "eq", model, {**_q_params(q), "rel_tol": rel_tol, "target": target})


def est_eta_tail(model, q: CountingQuery, k: int, replicas: int = 2000, workers: int = 1, equality: bool = False) -> EstimateReport:
    """P(eta_hat >= k) against ``theta(b - a, t) ** k`` (a bound; equality when ``equality``)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    eta = eta_samples(model, q, replicas, workers=workers)[:, 0]
    p, se = _mean_se(eta - 1 >= k)
    target = theta(q.b - q.a, q.t) ** k
    return _report(
        f"eta_tail_k{k}", p, se, replicas, target, 3 * se, "eq" if equality else "le", model,
        {**_q_params(q), "k": k, "equality": equality},
    )


def check_rw_bound(system: CoalescingSystem, q: CountingQuery, k: int, replicas: int = 5000, workers: int = 1) -> EstimateReport:
    """P(eta >= k) <= P(eta >= 2) ** (k - 1) on a lattice system, with delta-method SE of the difference."""
    if _is_skeleton(system):
        raise ConfigError("check_rw_bound needs a lattice system")
    if k < 1:
        raise ValueError("k must be >= 1")
    eta = eta_samples(system, q, replicas, workers=workers)[:, 0]
    ik = (eta >= k).astype(float)
    i2 = (eta >= 2).astype(float)
    left, p2 = ik.mean(), i2.mean()
    if k == 1:
        right, infl = 1.0, ik
    else:
        right = p2 ** (k - 1)
        infl = ik - (k - 1) * p2 ** (k - 2) * i2
    se = infl.std(ddof=1) / math.sqrt(replicas)
    return _report(
        f"rw_bound_k{k}", left, se, replicas, right, 3 * se, "le", system, {**_q_params(q), "k": k},
        note=f"P(eta>=2)={p2:.6g}",
    )


# ---------------------------------------------------------------------------
# invariance principle


def dkw_band(n: int, level: float = 0.01) -> float:
    return math.sqrt(math.log(2.0 / level) / (2.0 * n))


def donsker_samples(system: CoalescingSystem, times, replicas: int, workers: int = 1) -> np.ndarray:
    """Rescaled position of one walker from the origin at each of ``times``, shape (replicas, len(times))."""
    obs = _obs_lattice(system, times)
    V = _lattice_values(system, np.array([0]), 0, obs, _seeds(system, replicas), workers)
    return V[:, 0, :]


def pair_meeting_times(system: CoalescingSystem, d: float, t_max: float, replicas: int, workers: int = 1, seeds=None) -> np.ndarray:
    """Rescaled first meeting times of two walkers ``d`` apart; ``inf`` if not met by ``t_max``."""
    if system.kind == "continuous_time":
        raise ConfigError("pair meeting times are implemented for discrete kinds")
    gap = int(round(d / system.delta))
    if system.kind == "discrete_parity" and gap % 2:
        gap += 1
    n_max = int(math.ceil(t_max / system.delta**2))
    x_lo, x_hi = _window_for(system, 0, gap, n_max)
    cdf, steps = system.law.arrays()
    tag = system.coin_tag
    seeds = _seeds(system, replicas) if seeds is None else seeds

    def run(s):
        n, over = meeting_kernel(s, tag, cdf, steps, 0, gap, 0, n_max, x_lo, x_hi)
        if over.any():
            raise WindowOverflowError("walker left the estimator window")
        return n

    n = map_replicas(run, seeds, workers).astype(float)
    n[n < 0] = np.inf
    return n * system.delta**2


def pair_meeting_check(system: CoalescingSystem, d: float = 1.0, grid=None, replicas: int = 10000,
                       workers: int = 1, level: float = 0.01) -> EstimateReport:
    """Sup distance on ``grid`` between the empirical meeting-time CDF and ``1 - theta(d, .)``."""
    grid = np.linspace(0.1, 2.0, 20) * d * d if grid is None else np.asarray(grid, dtype=float)
    ref = pair_meeting_cdf(d, grid)
    tau = pair_meeting_times(system, d, float(grid[-1]), replicas, workers)
    emp = (tau[:, None] <= grid[None, :]).mean(axis=0)
    dist = float(np.max(np.abs(emp - ref)))
    thr = dkw_band(replicas, level) + 2 * system.delta / math.sqrt(grid[0])
    return _report(
        "pair_meeting_cdf", dist, 0.5 / math.sqrt(replicas), replicas, 0.0, thr, "le", system,
        {"d": d, "grid": grid.tolist(), "level": level},
        note=f"lattice gap {int(round(d / system.delta))}",
    )


def check_donsker(system: CoalescingSystem, times=(1.0,), replicas: int = 10000, workers: int = 1,
                  d: float = 1.0, level: float = 0.01, meeting_grid=None) -> list[EstimateReport]:
    """KS distance of rescaled marginals to N(0, t), exact-variance check, and the pair meeting law."""
    if _is_skeleton(system):
        raise ConfigError("check_donsker needs a lattice system")
    times = [float(t) for t in times]
    X = donsker_samples(system, times, replicas, workers)
    var_law = float(system.law.variance)
    out = []
    obs = _obs_lattice(system, times)
    for k, t in enumerate(times):
        x = X[:, k]
        exact_var = system.delta**2 * float(obs[k]) * var_law if system.kind != "continuous_time" else t
        ks = sps.kstest(x, sps.norm(scale=math.sqrt(exact_var)).cdf).statistic
        thr = dkw_band(replicas, level) + 2 * system.delta / math.sqrt(t)
        out.append(_report("donsker_ks", ks, 0.5 / math.sqrt(replicas), replicas, 0.0, thr, "le", system,
                           {"t": t, "level": level}, x=t))
        v = float(np.var(x, ddof=1))
        se_v = v * math.sqrt(2.0 / (replicas - 1))
        out.append(_report("donsker_variance", v, se_v, replicas, exact_var, 3 * se_v, "eq", system, {"t": t}, x=t,
                           note=f"exact variance delta^2 n var = {exact_var:.6g}"))
    if system.kind == "continuous_time":
        out.append(EstimateReport("pair_meeting_cdf", math.nan, math.nan, replicas, None, 0.0, "not_applicable",
                                  int(system.seed), config_digest(system.to_json())))
    else:
        out.append(pair_meeting_check(system, d, meeting_grid, replicas, workers, level))
    return out


# ---------------------------------------------------------------------------
# short-interval conditions


def interval_values(model, t: float, offsets, replicas: int, workers: int = 1, t0: float = 0.0, a: float = 0.0):
    """Arrival positions at ``t0 + t`` of paths from ``a + offsets`` at ``t0``.

    For lattice systems ``a`` is moved to the nearest admissible site to its
    right, which realizes the supremum over spatial phases, and offsets are
    rounded to admissible sites.  Returns ``(values, offsets_used)``.
    """
    offsets = np.asarray(offsets, dtype=float)
    seeds = _seeds(model, replicas)
    if _is_skeleton(model):
        pts = tuple((a + o, t0) for o in offsets)
        cfg = SkeletonConfig(pts, model.step, t0 + t, model.seed, model.bridge_correction)
        V = map_replicas(lambda s: skeleton_values(cfg, [t0 + t], s), seeds, workers)
        return V[:, :, 0], offsets
    j0 = _start_lattice_time(model, t0)
    i_a = _anchor(model, a, j0)
    pitch = _pitch(model)
    steps = np.rint(offsets / (pitch * model.delta)).astype(np.int64)
    sites = i_a + pitch * steps
    V = _lattice_values(model, sites, j0, _obs_lattice(model, [t0 + t]), seeds, workers)
    return V[:, :, 0], steps * pitch * model.delta


def _interval_offsets(model, eps_max: float, symmetric: bool) -> np.ndarray:
    if _is_skeleton(model):
        return None
    step = _pitch(model) * model.delta
    m = int(math.floor(eps_max / step + 1e-9))
    k = np.arange(-m if symmetric else 0, m + 1)
    return k * step


def _eps_samples(model, t, eps_grid, replicas, workers, t0, a):
    """eta for [a, a + eps] over the grid, shape (replicas, len(eps_grid))."""
    eps = np.asarray(eps_grid, dtype=float)
    if np.any(eps < 0):
        raise ValueError("eps must be nonnegative")
    offsets = _interval_offsets(model, eps.max(), symmetric=False)
    if offsets is None:
        offsets = np.unique(np.concatenate([[0.0], eps]))
    V, used = interval_values(model, t, offsets, replicas, workers, t0, a)
    cols = []
    for e in eps:
        inside = used <= e + 1e-9
        cols.append(_count_distinct(V[:, inside]))
    return np.stack(cols, axis=1)


def _slope_through_origin(x: np.ndarray, samples: np.ndarray):
    """OLS slope through the origin per replica; returns (mean slope, SE)."""
    w = x / np.sum(x * x)
    per = samples @ w
    return _mean_se(per)


def _trend_violations(x, v, se, sigmas=3.0) -> int:
    """Count adjacent pairs (sorted by x) where the smaller-x value exceeds the larger by > sigmas SE."""
    order = np.argsort(x)
    v, se = np.asarray(v)[order], np.asarray(se)[order]
    bad = v[:-1] > v[1:] + sigmas * np.sqrt(se[:-1] ** 2 + se[1:] ** 2)
    return int(bad.sum())


def est_B1(model, t: float = 1.0, eps_grid=None, replicas: int = 2000, workers: int = 1,
           t0: float = 0.0, a: float = 0.0, slope_tol: float = 0.2) -> list[EstimateReport]:
    """sup P(eta_hat(t0, t; a, a + eps) >= 1) per eps, plus the small-eps slope against 1/sqrt(pi t)."""
    eps = _default_eps(model) if eps_grid is None else np.asarray(eps_grid, dtype=float)
    E = _eps_samples(model, t, eps, replicas, workers, t0, a)
    ind = (E >= 2).astype(float)
    p, se = _mean_se(ind)
    params = {"t": t, "t0": t0, "a": a, "eps": eps.tolist()}
    out = [
        _report("B1_curve", p[k], se[k], replicas, theta(e, t) if e > 0 else 0.0, 0.0, "", model, params, x=e,
                note="target column is theta(eps, t)")
        for k, e in enumerate(eps)
    ]
    pos = eps > 0
    slope, s_se = _slope_through_origin(eps[pos], ind[:, pos])
    target = 1.0 / math.sqrt(math.pi * t)
    out.append(_report("B1_slope", slope, s_se, replicas, target, slope_tol * target, "eq", model, params))
    return out


def est_B2(model, t: float = 1.0, eps_grid=None, replicas: int = 2000, workers: int = 1,
           t0: float = 0.0, a: float = 0.0, threshold: float = 0.05) -> list[EstimateReport]:
    """eps^-1 sup P(eta_hat >= 2): the curve, a trend check and a small-eps upper-CI check."""
    eps = _default_eps(model) if eps_grid is None else np.asarray(eps_grid, dtype=float)
    if np.any(eps <= 0):
        raise ValueError("est_B2 needs positive eps")
    E = _eps_samples(model, t, eps, replicas, workers, t0, a)
    v, se = _mean_se((E >= 3) / eps[None, :])
    params = {"t": t, "t0": t0, "a": a, "eps": eps.tolist(), "threshold": threshold}
    out = [
        _report("B2_curve", v[k], se[k], replicas, e / (math.pi * t), 0.0, "", model, params, x=e,
                note="target column is eps/(pi t)")
        for k, e in enumerate(eps)
    ]
    out.append(_report("B2_trend", _trend_violations(eps, v, se), 0.0, replicas, 0.0, 0.0, "le", model, params,
                       note="adjacent eps pairs where the smaller eps is significantly larger"))
    k0 = int(np.argmin(eps))
    out.append(_report("B2_small_eps", v[k0], se[k0], replicas, threshold, 3 * se[k0], "ci_below", model, params,
                       x=eps[k0]))
    return out


def _default_eps(model) -> np.ndarray:
    if _is_skeleton(model):
        return np.linspace(0.02, 0.2, 10)
    step = _pitch(model) * model.delta
    return step * np.arange(1, 11)


def est_B1p_B2p(model, t: float = 1.0, eps_grid=None, replicas: int = 2000, workers: int = 1,
                t0: float = 0.0, a: float = 0.0) -> list[EstimateReport]:
    """On ``[a - eps, a + eps]``: P(|N| > 1) and eps^-1 P(N differs from N+ and N- together)."""
    eps = _default_eps(model) if eps_grid is None else np.asarray(eps_grid, dtype=float)
    if _is_skeleton(model):
        offsets = np.unique(np.concatenate([-eps, [0.0], eps]))
    else:
        offsets = _interval_offsets(model, eps.max(), symmetric=True)
    V, used = interval_values(model, t, offsets, replicas, workers, t0, a)
    ca, cb = [], []
    for e in eps:
        inside = np.abs(used) <= e + 1e-9
        W = V[:, inside]
        ca.append(_count_distinct(W) > 1)
        left, right = W[:, :1], W[:, -1:]
        cb.append(np.any((W != left) & (W != right), axis=1))
    A = np.stack(ca, axis=1).astype(float)
    B = np.stack(cb, axis=1).astype(float)
    pa, sa = _mean_se(A)
    with np.errstate(divide="ignore", invalid="ignore"):
        pb, sb = _mean_se(np.where(eps[None, :] > 0, B / np.where(eps > 0, eps, 1.0)[None, :], 0.0))
    params = {"t": t, "t0": t0, "a": a, "eps": eps.tolist()}
    out = [_report("B1p_curve", pa[k], sa[k], replicas, None, 0.0, "", model, params, x=e) for k, e in enumerate(eps)]
    out += [_report("B2p_curve", pb[k], sb[k], replicas, None, 0.0, "", model, params, x=e) for k, e in enumerate(eps)]
    out.append(_report("B1p_trend", _trend_violations(eps, pa, sa), 0.0, replicas, 0.0, 0.0, "le", model, params))
    out.append(_report("B2p_trend", _trend_violations(eps, pb, sb), 0.0, replicas, 0.0, 0.0, "le", model, params))
    return out


# ---------------------------------------------------------------------------
# tightness


@dataclass(frozen=True)
class ScanGrid:
    """Box corners of the cover of [-L, L] x [-T, T] by (u/2) x t boxes."""

    L: float
    T: float
    u: float
    t: float

    def __post_init__(self):
        if not all(v > 0 for v in (self.L, self.T, self.u, self.t)):
            raise ValueError("ScanGrid parameters must be positive")

    def points(self) -> list[tuple[float, float]]:
        xs = np.arange(-self.L, self.L, self.u / 2)
        ts = np.arange(-self.T, self.T, self.t)
        return [(float(x), float(s)) for s in ts for x in xs]


def _lattice_A(system, x0, t0, u, t, seeds, workers) -> np.ndarray:
    """Indicator of A_{t,u}(x0, t0) per replica on a discrete lattice system.

    Every path meeting the small box passes a lattice point inside it (steps
    are shorter than the box width), so walkers started at all those points
    represent the paths that matter.
    """
    d2 = system.delta**2
    j0 = _lattice_index(t0 / d2)
    j1 = int(math.floor((t0 + t) / d2 + 1e-9))
    j2 = int(math.floor((t0 + 2 * t) / d2 + 1e-9))
    xs, ts = [], []
    for j in range(j0, j1 + 1):
        s = _sites(system, x0 - u / 4, x0 + u / 4, j)
        xs.append(s)
        ts.append(np.full(s.size, j, dtype=np.int64))
    start_x, start_t = np.concatenate(xs), np.concatenate(ts)
    if start_x.size == 0:
        return np.zeros(seeds.size, dtype=bool)
    if max(abs(s) for s in system.law.steps) * system.delta > u / 2:
        raise ConfigError("box width u/2 must exceed the largest lattice step")
    x_lo, x_hi = _window_for(system, start_x.min(), start_x.max(), j2 - j0)
    cdf, steps = system.law.arrays()
    tag = system.coin_tag
    obs = np.arange(j0, j2 + 1, dtype=np.int64)
    # a walker counts only after its own start
    after = obs[None, :] > start_t[:, None]

    def run(s):
        pos, over = discrete_kernel(s, tag, cdf, steps, start_x, start_t, obs, x_lo, x_hi)
        if over.any():
            raise WindowOverflowError("walker left the estimator window")
        far = (np.abs(pos * system.delta - x0) >= u / 2 - 1e-12) & (pos != MISSING) & after[None]
        return far.any(axis=(1, 2))

    return map_replicas(run, seeds, workers)


def _skeleton_A(cfg, x0, t0, u, t, seeds, workers, k_points) -> np.ndarray:
    from .brownian import dense_starting_set

    pts = dense_starting_set(k_points, (x0 - u / 4, x0 + u / 4), (t0, t0 + t))
    sk = SkeletonConfig(pts, cfg.step, t0 + 2 * t, cfg.seed, cfg.bridge_correction)
    _, m0 = sk.arrays()
    obs_m = np.arange(int(m0.min()), sk.end_index + 1)
    times = obs_m * sk.step
    after = obs_m[None, :] > m0[:, None]

    def run(s):
        V = skeleton_values(sk, times, s)
        with np.errstate(invalid="ignore"):
            far = (np.abs(V - x0) >= u / 2) & after[None]
        return far.any(axis=(1, 2))

    return map_replicas(run, seeds, workers)


def est_T1(model, u_grid, t_grid, replicas: int = 1000, workers: int = 1, x0: float = 0.0, t0: float = 0.0,
           scan: ScanGrid | None = None, k_points: int = 64) -> list[EstimateReport]:
    """t^-1 sup P(A_{t,u}(x0, t0)) on a (t, u) grid, plus a per-u check that it decreases as t decreases.

    Without ``scan`` the supremum uses the single box at ``(x0, t0)``
    (translation invariance); with ``scan`` every box corner of the cover is
    evaluated and the largest probability kept.
    """
    if not _is_skeleton(model) and model.kind == "continuous_time":
        raise ConfigError("est_T1 supports discrete lattice systems and skeletons")
    u_grid = np.asarray(u_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    seeds = _seeds(model, replicas)
    out = []
    for u in u_grid:
        vals, ses = [], []
        for t in t_grid:
            corners = [(x0, t0)] if scan is None else ScanGrid(scan.L, scan.T, u, t).points()
            best = (-1.0, 0.0)
            for cx, ct in corners:
                if _is_skeleton(model):
                    ind = _skeleton_A(model, cx, ct, u, t, seeds, workers, k_points)
                else:
                    ind = _lattice_A(model, cx, ct, u, t, seeds, workers)
                p, se = _mean_se(ind.astype(float))
                best = max(best, (float(p), float(se)))
            vals.append(best[0] / t)
            ses.append(best[1] / t)
            out.append(_report("T1_surface", vals[-1], ses[-1], replicas, None, 0.0, "", model,
                               {"u": u, "t": t, "x0": x0, "t0": t0}, x=t, note=f"u={u:g}"))
        out.append(_report("T1_trend", _trend_violations(t_grid, vals, ses), 0.0, replicas, 0.0, 0.0, "le", model,
                           {"u": u, "t_grid": t_grid.tolist()}, x=u, note=f"u={u:g}"))
    return out


# ---------------------------------------------------------------------------
# path regularity


def max_oscillations(X: np.ndarray, lag: int) -> np.ndarray:
    """max_{0<=k<=lag} |X[s+k] - X[s]| over disjoint windows s = 0, lag, 2 lag, ... (flattened)."""
    X = np.atleast_2d(X)
    nw = (X.shape[1] - 1) // lag
    if nw < 1:
        raise ValueError("lag longer than the path")
    blocks = X[:, : nw * lag].reshape(X.shape[0], nw, lag)
    ends = X[:, lag : nw * lag + 1 : lag][:, :, None]
    full = np.concatenate([blocks, ends], axis=2)
    return np.abs(full - full[:, :, :1]).max(axis=2).ravel()


def holder_exponent(X: np.ndarray, dt: float, lag_grid):
    """Slope of log median window oscillation against log lag; returns (slope, stderr, lags, medians)."""
    lags = np.unique(np.rint(np.asarray(lag_grid, dtype=float) / dt).astype(int))
    lags = lags[lags >= 1]
    if lags.size < 2:
        raise ValueError("lag grid must contain at least two distinct lags of at least one step")
    med = np.array([np.median(max_oscillations(X, int(L))) for L in lags])
    if np.any(med <= 0):
        raise ValueError("zero oscillation; the lag grid is degenerate for these paths")
    fit = sps.linregress(np.log(lags * dt), np.log(med))
    return float(fit.slope), float(fit.stderr), lags * dt, med


def holder_paths(model, horizon: float, replicas: int, workers: int = 1):
    """Sampled single-walker paths on the model's native grid; returns (values, dt)."""
    seeds = _seeds(model, replicas)
    if _is_skeleton(model):
        cfg = SkeletonConfig(((0.0, 0.0),), model.step, horizon, model.seed, model.bridge_correction)
        times = np.arange(cfg.end_index + 1) * cfg.step
        V = map_replicas(lambda s: skeleton_values(cfg, times, s), seeds, workers)
        return V[:, 0, :], cfg.step
    n = int(round(horizon / model.delta**2))
    obs = np.arange(n + 1)
    V = _lattice_values(model, np.array([0]), 0, obs, seeds, workers)
    return V[:, 0, :], model.delta**2


def est_holder(model, lag_grid=None, replicas: int = 200, workers: int = 1, horizon: float = 1.0,
               window=(0.40, 0.55)) -> EstimateReport:
    """Fitted oscillation exponent of single-walker paths; pass iff inside ``window``."""
    X, dt = holder_paths(model, horizon, replicas, workers)
    if lag_grid is None:
        # below ~50 grid steps the lattice oscillations are visibly integer-valued
        lag_grid = np.geomspace(max(50 * dt, 1e-3 * horizon), 0.1 * horizon, 8)
    slope, se, lags, med = holder_exponent(X, dt, lag_grid)
    mid, half = 0.5 * (window[0] + window[1]), 0.5 * (window[1] - window[0])
    return _report("holder_exponent", slope, se, replicas, mid, half, "eq", model,
                   {"lags": lags.tolist(), "horizon": horizon}, note=f"window [{window[0]}, {window[1]}]")


# ---------------------------------------------------------------------------
# structural checks


def check_order_invariance(cfg: SkeletonConfig, permutation, q: CountingQuery, replicas: int = 2000,
                           workers: int = 1, independent: bool = True, level: float = 0.01) -> EstimateReport:
    """Two-sample KS on eta under the given order and a permuted order; pass iff p-value > level."""
    perm_cfg = cfg.permuted(permutation)
    a = eta_samples(cfg, q, replicas, workers=workers)[:, 0]
    seeds_b = _seeds(cfg, replicas, start=replicas) if independent else None
    b = eta_samples(perm_cfg, q, replicas, workers=workers, seeds=seeds_b)[:, 0]
    res = sps.ks_2samp(a, b)
    return _report("order_invariance", res.pvalue, 0.0, replicas, level, 0.0, "gt", cfg,
                   {**_q_params(q), "permutation": list(map(int, permutation)), "independent": independent},
                   note=f"KS statistic {res.statistic:.6g}")


def check_monotonicity(model, q: CountingQuery, t_grid, replicas: int = 1000, workers: int = 1) -> EstimateReport:
    """Pathwise check that eta(t0, t; a, b) never increases along ``t_grid``."""
    t_grid = sorted(float(t) for t in t_grid)
    params = {**_q_params(q), "t_grid": t_grid}
    if not _is_skeleton(model) and not model.noncrossing:
        return EstimateReport("monotonicity", math.nan, math.nan, replicas, None, 0.0, "not_applicable",
                              int(model.seed), config_digest({"check": "monotonicity", "params": params}),
                              note="crossing system")
    E = eta_samples(model, q, replicas, t_list=t_grid, workers=workers)
    violations = int(np.any(np.diff(E, axis=1) > 0, axis=1).sum())
    return _report("monotonicity", violations, 0.0, replicas, 0.0, 0.0, "le", model, params,
                   note="replicas with an increase of eta along t_grid")
