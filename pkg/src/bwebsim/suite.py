"""Named checks for the ``verify`` command.

A suite file looks like::

    {"seed": 1, "checks": [{"name": "est_eta_mean",
                            "params": {"model": {"kind": "discrete_parity", "delta": 0.02},
                                       "query": {"t0": 0, "t": 1, "a": 0, "b": 1}}}]}

``model`` is either a lattice description (``kind``, ``delta``, optional
``increments``) or a skeleton (``kind: "skeleton"`` with ``starting_set`` or
``evenly: {"k", "a", "b", "t0"}`` or ``dense: {"k", "x", "t"}``, plus ``step``
and optional ``horizon``).
"""

from __future__ import annotations

import numpy as np

from . import stats
from .brownian import SkeletonConfig, dense_starting_set
from .counting import CountingQuery
from .walks import ConfigError, IncrementLaw


class UnknownCheck(KeyError):
    pass


def build_model(cfg: dict, seed: int, horizon: float | None = None):
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("model needs a 'kind'")
    kind = cfg["kind"]
    seed = int(cfg.get("seed", seed))
    if kind == "skeleton":
        if "starting_set" in cfg:
            pts = tuple(tuple(p) for p in cfg["starting_set"])
        elif "evenly" in cfg:
            e = cfg["evenly"]
            pts = tuple((float(x), float(e.get("t0", 0.0))) for x in np.linspace(e["a"], e["b"], int(e["k"])))
        elif "dense" in cfg:
            e = cfg["dense"]
            pts = dense_starting_set(int(e["k"]), tuple(e.get("x", (-1, 1))), tuple(e.get("t", (0, 1))))
        else:
            raise ConfigError("skeleton model needs starting_set, evenly or dense")
        hz = float(cfg.get("horizon", horizon if horizon is not None else 1.0))
        return SkeletonConfig(pts, float(cfg.get("step", 1e-3)), hz, seed, bool(cfg.get("bridge_correction", True)))
    law = IncrementLaw.from_pairs(cfg["increments"]) if "increments" in cfg else None
    return stats.lattice_system(kind, float(cfg.get("delta", 0.02)), seed, law)


def _query(p) -> CountingQuery:
    if "query" not in p:
        raise ConfigError("check needs a 'query'")
    return CountingQuery.from_json(p["query"])


def _horizon_q(p):
    q = p.get("query")
    if q is None:
        return None
    ts = p.get("t_grid", [q["t"]])
    return float(q["t0"]) + float(max(ts))


def _r(replicas, p, default):
    return int(replicas if replicas is not None else p.get("replicas", default))


def _eta_mean(p, seed, replicas, workers):
    m = build_model(p["model"], seed, _horizon_q(p))
    return [stats.est_eta_mean(m, _query(p), _r(replicas, p, 2000), workers, float(p.get("rel_tol", 0.05)),
                              p.get("target"))]


def _eta_tail(p, seed, replicas, workers):
    m = build_model(p["model"], seed, _horizon_q(p))
    ks = p.get("k", [1])
    ks = ks if isinstance(ks, list) else [ks]
    return [stats.est_eta_tail(m, _query(p), int(k), _r(replicas, p, 2000), workers, bool(p.get("equality", False)))
            for k in ks]


def _rw_bound(p, seed, replicas, workers):
    m = build_model(p["model"], seed)
    return [stats.check_rw_bound(m, _query(p), int(p.get("k", 3)), _r(replicas, p, 5000), workers)]


def _donsker(p, seed, replicas, workers):
    m = build_model(p["model"], seed)
    return stats.check_donsker(m, p.get("times", [1.0]), _r(replicas, p, 10000), workers, float(p.get("d", 1.0)),
                               float(p.get("level", 0.01)), p.get("grid"))


def _pair(p, seed, replicas, workers):
    m = build_model(p["model"], seed)
    return [stats.pair_meeting_check(m, float(p.get("d", 1.0)), p.get("grid"), _r(replicas, p, 10000), workers)]


def _duality(p, seed, replicas, workers):
    m = build_model(p["model"], seed)
    return [stats.est_duality(m, _query(p), _r(replicas, p, 2000), workers)]


def _eps_kw(p):
    return {"t": float(p.get("t", 1.0)), "eps_grid": p.get("eps"), "t0": float(p.get("t0", 0.0)), "a": float(p.get("a", 0.0))}


def _b1(p, seed, replicas, workers):
    kw = _eps_kw(p)
    m = build_model(p["model"], seed, kw["t0"] + kw["t"])
    return stats.est_B1(m, replicas=_r(replicas, p, 2000), workers=workers, slope_tol=float(p.get("slope_tol", 0.2)), **kw)


def _b2(p, seed, replicas, workers):
    kw = _eps_kw(p)
    m = build_model(p["model"], seed, kw["t0"] + kw["t"])
    return stats.est_B2(m, replicas=_r(replicas, p, 2000), workers=workers, threshold=float(p.get("threshold", 0.05)), **kw)


def _b1p(p, seed, replicas, workers):
    kw = _eps_kw(p)
    m = build_model(p["model"], seed, kw["t0"] + kw["t"])
    return stats.est_B1p_B2p(m, replicas=_r(replicas, p, 2000), workers=workers, **kw)


def _t1(p, seed, replicas, workers):
    m = build_model(p["model"], seed)
    scan = p.get("scan")
    scan = None if scan is None else stats.ScanGrid(scan["L"], scan["T"], 1.0, 1.0)
    return stats.est_T1(m, p.get("u", [0.5]), p.get("t_grid", [0.01, 0.02, 0.04]), _r(replicas, p, 1000), workers,
                        float(p.get("x0", 0.0)), float(p.get("t0", 0.0)), scan, int(p.get("k_points", 64)))


def _holder(p, seed, replicas, workers):
    m = build_model(p["model"], seed)
    return [stats.est_holder(m, p.get("lags"), _r(replicas, p, 200), workers, float(p.get("horizon", 1.0)))]


def _order(p, seed, replicas, workers):
    q = _query(p)
    m = build_model(p["model"], seed, _horizon_q(p))
    if not isinstance(m, SkeletonConfig):
        raise ConfigError("check_order_invariance needs a skeleton model")
    perm = p.get("permutation", "reverse")
    if perm == "reverse":
        perm = list(range(m.k - 1, -1, -1))
    return [stats.check_order_invariance(m, perm, q, _r(replicas, p, 2000), workers,
                                         bool(p.get("independent", True)), float(p.get("level", 0.01)))]


def _mono(p, seed, replicas, workers):
    m = build_model(p["model"], seed, _horizon_q(p))
    return [stats.check_monotonicity(m, _query(p), p.get("t_grid", [0.25, 0.5, 1.0, 2.0]), _r(replicas, p, 1000), workers)]


CHECKS = {
    "est_eta_mean": _eta_mean,
    "est_eta_tail": _eta_tail,
    "check_rw_bound": _rw_bound,
    "check_donsker": _donsker,
    "pair_meeting": _pair,
    "est_duality": _duality,
    "est_B1": _b1,
    "est_B2": _b2,
    "est_B1p_B2p": _b1p,
    "est_T1": _t1,
    "est_holder": _holder,
    "check_order_invariance": _order,
    "check_monotonicity": _mono,
}


def run_check(name: str, params: dict, seed: int, replicas: int | None = None, workers: int = 1):
    try:
        fn = CHECKS[name]
    except KeyError:
        raise UnknownCheck(name) from None
    return fn(params or {}, seed, replicas, workers)


def validate_suite(suite) -> list[dict]:
    if not isinstance(suite, dict) or not isinstance(suite.get("checks"), list) or not suite["checks"]:
        raise ConfigError("suite needs a nonempty 'checks' list")
    for c in suite["checks"]:
        if not isinstance(c, dict) or "name" not in c:
            raise ConfigError("each check needs a 'name'")
        if c["name"] not in CHECKS:
            raise UnknownCheck(c["name"])
    return suite["checks"]

