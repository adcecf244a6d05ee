"""Acceptance criteria 1-14, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` or ``python3 tests/test_acceptance.py``.
"""

import json
import math
import sys

import numpy as np
import pytest
from scipy import integrate

from bwebsim.brownian import SkeletonConfig, dense_starting_set, sample_skeleton, theta
from bwebsim.cli import main as cli_main
from bwebsim.counting import CountingQuery
from bwebsim.geometry import Path, PathFamily, SpaceTimePoint, hausdorff, path_metric, rho
from bwebsim.stats import (
    check_donsker,
    check_monotonicity,
    check_order_invariance,
    check_rw_bound,
    est_B1,
    est_B2,
    est_eta_mean,
    est_eta_tail,
    est_holder,
    lattice_system,
    pair_meeting_check,
)

try:
    from conftest import ACCEPTANCE
except ImportError:  # run as a script
    ACCEPTANCE = {}

Q = CountingQuery(0.0, 1.0, 0.0, 1.0)


def record(n: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {detail}"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


def test_01_expectation_law():
    r = est_eta_mean(lattice_system("discrete_parity", 0.02, seed=1), Q, replicas=2000)
    record(1, r.verdict == "pass",
           f"E eta = {r.estimate:.4f} +- {r.std_error:.4f}, target {r.target:.6f}, tol {r.tolerance:.4f}")


def _quad_theta(d, t):
    s = math.sqrt(2 * t)
    tail, _ = integrate.quad(lambda z: math.exp(-z * z / 2) / math.sqrt(2 * math.pi), d / s, math.inf, epsabs=1e-14)
    return 1 - 2 * tail


def _mc_no_meeting(d, t, n, rng):
    # exact: endpoint of the gap, then the minimum of the bridge to it (gap variance 2t)
    end = d + rng.normal(0.0, math.sqrt(2 * t), n)
    e = rng.exponential(1.0, n)
    low = 0.5 * (d + end - np.sqrt((end - d) ** 2 + 4 * t * e))
    return np.mean(low > 0)


def test_02_theta_validation():
    rng = np.random.default_rng(20240)
    parts, ok = [], True
    for d, t in [(1, 1), (0.5, 2), (2, 0.5)]:
        th = theta(d, t)
        qd = abs(th - _quad_theta(d, t))
        p = _mc_no_meeting(d, t, 100_000, rng)
        se = math.sqrt(p * (1 - p) / 100_000)
        ok &= qd < 1e-10 and abs(p - th) <= 3 * se
        parts.append(f"({d},{t}): quad err {qd:.1e}, MC {p:.4f} vs {th:.4f} (3SE {3 * se:.4f})")
    record(2, ok, "theta " + "; ".join(parts))


def test_03_two_point_equality():
    cfg = SkeletonConfig([(0.0, 0.0), (1.0, 0.0)], 1e-4, 1.0, seed=3)
    r = est_eta_tail(cfg, Q, 1, replicas=10_000, equality=True)
    record(3, r.verdict == "pass",
           f"P(eta_hat>=1) = {r.estimate:.4f} +- {r.std_error:.4f} vs theta(1,1) = {r.target:.4f}")


def test_04_tail_bound():
    pts = [(float(x), 0.0) for x in np.linspace(0, 1, 21)]
    cfg = SkeletonConfig(pts, 1e-4, 1.0, seed=4)
    rs = [est_eta_tail(cfg, Q, k, replicas=2000) for k in (2, 3)]
    record(4, all(r.verdict == "pass" for r in rs), "; ".join(
        f"k={k}: {r.estimate:.4f} +- {r.std_error:.4f} <= {r.target:.4f}" for k, r in zip((2, 3), rs)))


def test_05_random_walk_bound():
    r = check_rw_bound(lattice_system("discrete_parity", 0.05, seed=5), CountingQuery(0.0, 1.0, 0.0, 0.5), 3, replicas=5000)
    record(5, r.verdict == "pass",
           f"P(eta>=3) = {r.estimate:.4f} <= P(eta>=2)^2 = {r.target:.4f} + {r.tolerance:.4f} ({r.note})")


def test_06_donsker_marginal():
    m = lattice_system("discrete_parity", 0.01, seed=6)
    rows = check_donsker(m, [1.0], replicas=10_000)
    ks = next(r for r in rows if r.name.startswith("donsker_ks"))
    var = next(r for r in rows if r.name.startswith("donsker_var"))
    # exact second moment of the rescaled walk: delta^2 * n steps of unit variance
    exact_var = m.delta**2 * round(1.0 / m.delta**2)
    ok = ks.estimate < 0.025 and exact_var == 1.0 and var.verdict == "pass"
    record(6, ok, f"KS = {ks.estimate:.4f} < 0.025; exact variance {exact_var}; sample variance {var.estimate:.4f}")


def test_07_pair_meeting_law():
    r = pair_meeting_check(lattice_system("discrete_parity", 0.01, seed=7), 1.0, np.linspace(0.1, 2.0, 20), replicas=10_000)
    record(7, r.estimate < 0.03, f"sup |F_emp - (1 - theta)| = {r.estimate:.4f} < 0.03 on 20 grid points")


def test_08_b1_b2_trends():
    m = lattice_system("discrete_parity", 0.01, seed=8)
    b1 = est_B1(m, 1.0, np.linspace(0.04, 0.2, 9), replicas=4000)
    slope = next(r for r in b1 if r.name == "B1_slope")
    b2 = est_B2(m, 1.0, [0.1, 0.2, 0.4, 0.6, 0.8, 1.0], replicas=4000)
    trend = next(r for r in b2 if r.name == "B2_trend")
    small = next(r for r in b2 if r.name == "B2_small_eps")
    curve = ", ".join(f"{r.x:g}:{r.estimate:.3f}" for r in b2 if r.name == "B2_curve")
    ok = slope.verdict == trend.verdict == small.verdict == "pass"
    record(8, ok, f"B1 slope {slope.estimate:.4f} vs {slope.target:.4f} (20%); B2 curve [{curve}], "
                  f"{int(trend.estimate)} trend violations, smallest eps {small.estimate:.4f} + {small.tolerance:.4f} < 0.05")


def test_09_monotonicity():
    r = check_monotonicity(lattice_system("discrete_parity", 0.02, seed=9), Q, [0.25, 0.5, 1.0, 2.0], replicas=1000)
    record(9, r.verdict == "pass" and r.estimate == 0, f"{int(r.estimate)} replicas with eta increasing in t (of 1000)")


def _random_path(rng):
    if rng.random() < 0.1:
        return Path.boundary(int(rng.choice([1, -1])), float(rng.choice([-math.inf, 0.0, 1.5, math.inf])))
    n = int(rng.integers(1, 6))
    times = float(rng.uniform(-4, 4)) + np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 2, n - 1))])
    return Path.from_arrays(times, rng.normal(0, 1.5, n))


def test_10_metric_suite():
    rng = np.random.default_rng(10)
    tol = 1e-9
    worst_tri, ok = 0.0, True
    for _ in range(1000):
        p, q, r = (_random_path(rng) for _ in range(3))
        dpq, dqr, dpr = path_metric(p, q, tol), path_metric(q, r, tol), path_metric(p, r, tol)
        ok &= dpq == path_metric(q, p, tol)
        worst_tri = max(worst_tri, dpr - dpq - dqr)
        a, b, c = (SpaceTimePoint(float(rng.normal()), float(rng.normal())) for _ in range(3))
        ok &= rho(a, b) == rho(b, a) and rho(a, c) <= rho(a, b) + rho(b, c) + 3 * tol
        A = PathFamily([_random_path(rng) for _ in range(int(rng.integers(1, 4)))])
        B = PathFamily([_random_path(rng) for _ in range(int(rng.integers(1, 4)))])
        C = PathFamily([_random_path(rng) for _ in range(int(rng.integers(1, 4)))])
        ok &= hausdorff(A, A, tol) == 0 and hausdorff(A, B, tol) == hausdorff(B, A, tol)
        ok &= hausdorff(A, C, tol) <= hausdorff(A, B, tol) + hausdorff(B, C, tol) + 3 * tol
    ok &= worst_tri <= 3 * tol
    z = Path.constant(0.0, 0.0)
    e1 = abs(path_metric(z, Path.constant(1.0, 0.0)) - math.tanh(1))
    e2 = abs(path_metric(z, Path.constant(0.0, 1.0)) - math.tanh(1))
    ok &= e1 < 1e-9 and e2 < 1e-9
    record(10, bool(ok), f"1000 triples: symmetry exact, worst triangle excess {worst_tri:.1e}; "
                         f"tanh(1) cases off by {e1:.1e}, {e2:.1e}")


def test_11_refinement():
    pts = dense_starting_set(64, (-1.0, 1.0), (0.0, 1.0))
    cfg = SkeletonConfig(pts, 1e-3, 2.0, seed=11)
    top = sample_skeleton(cfg)[0]
    d = [hausdorff(sample_skeleton(cfg.prefix(k))[0], top) for k in (8, 16, 32, 64)]
    ok = all(x >= y for x, y in zip(d, d[1:]))
    record(11, ok, "d_H(W_k, W_64) for k = 8, 16, 32, 64: " + ", ".join(f"{x:.4f}" for x in d))


def test_12_order_invariance():
    pts = dense_starting_set(10, (0.0, 1.0), (0.0, 0.5))
    cfg = SkeletonConfig(pts, 1e-3, 1.5, seed=12)
    r = check_order_invariance(cfg, list(range(9, -1, -1)), CountingQuery(0.5, 1.0, 0.0, 1.0), replicas=2000)
    record(12, r.verdict == "pass", f"KS p-value {r.estimate:.4f} > 0.01 ({r.note})")


def test_13_holder():
    sk = est_holder(SkeletonConfig(((0.0, 0.0),), 1e-4, 1.0, seed=13), replicas=200)
    lat = est_holder(lattice_system("discrete_parity", 0.01, seed=13), replicas=200)
    ok = sk.verdict == lat.verdict == "pass"
    record(13, ok, f"exponent skeleton {sk.estimate:.4f}, lattice {lat.estimate:.4f}; window [0.40, 0.55]")


def test_14_determinism(tmp_path):
    lat = {"kind": "discrete_parity", "delta": 0.02}
    suite = {"seed": 14, "checks": [
        {"name": "est_eta_mean", "params": {"model": lat, "query": Q.to_json(), "replicas": 1000}},
        {"name": "est_eta_tail", "params": {"model": {"kind": "skeleton", "evenly": {"k": 6, "a": 0, "b": 1}, "step": 1e-3},
                                            "query": Q.to_json(), "k": [1, 2], "replicas": 700}},
        {"name": "est_B1", "params": {"model": lat, "eps": [0.04, 0.08, 0.12], "replicas": 700}},
        {"name": "check_donsker", "params": {"model": lat, "replicas": 700}},
    ]}
    cfg = tmp_path / "suite.json"
    cfg.write_text(json.dumps(suite))
    codes = [cli_main(["verify", "--config", str(cfg), "--out", str(tmp_path / f"w{w}"), "--workers", str(w)])
             for w in (1, 8)]
    same = all((tmp_path / "w1" / f).read_bytes() == (tmp_path / "w8" / f).read_bytes()
               for f in ("reports.csv", "reports.svg"))
    record(14, same and codes[0] == codes[1], f"reports.csv and reports.svg bitwise identical for 1 and 8 workers "
                                              f"(exit codes {codes})")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
