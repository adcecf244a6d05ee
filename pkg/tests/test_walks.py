import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bwebsim.geometry import Path, PathFamily, path_metric, phi
from bwebsim.walks import (
    CoalescingSystem,
    ConfigError,
    HashedClockField,
    HashedCoinField,
    IncrementLaw,
    ScriptedClockField,
    ScriptedCoinField,
    Window,
    WindowOverflowError,
    boundary_paths,
    rescale,
    simulate_continuous,
    simulate_crossing,
    simulate_discrete,
)


def system(kind="discrete_parity", x=(-60, 60), t=(0, 200), seed=1, law=None):
    kw = {} if law is None else {"law": law}
    return CoalescingSystem(kind, Window(x, t), 1.0, seed, **kw)


def knots(p):
    return [(float(x), float(t)) for t, x in zip(p.times, p.values)]


def test_scripted_single_walker():
    coins = ScriptedCoinField({(0, 0): 1, (1, 1): -1})
    (p,) = simulate_discrete(system(), [(0, 0)], 2, coins)
    assert knots(p) == [(0, 0), (1, 1), (0, 2)]


def test_scripted_two_walkers_coalesce():
    coins = ScriptedCoinField({(0, 0): 1, (2, 0): -1}, default=1)
    p, q = simulate_discrete(system(), [(0, 0), (2, 0)], 5, coins)
    assert p(1) == q(1) == 1
    for j in range(1, 6):
        assert p(j) == q(j)


def test_parity_start_rejected():
    with pytest.raises(ConfigError):
        simulate_discrete(system(), [(1, 0)], 4)


def _random_starts(rng, n, parity=True):
    out = set()
    while len(out) < n:
        i, j = int(rng.integers(-8, 9)), int(rng.integers(0, 8))
        if not parity or (i + j) % 2 == 0:
            out.add((i, j))
    return sorted(out)


@pytest.mark.parametrize("seed", range(5))
def test_parity_coalescence_noncrossing(seed):
    r = np.random.default_rng(seed)
    starts = _random_starts(r, 20)
    sysm = system(seed=seed)
    K = list(simulate_discrete(sysm, starts, 80))
    assert len(K) == len(starts)
    for p, (i, j) in zip(K, starts):
        assert p.start == j and p(j) == i
        assert np.all(np.abs(np.diff(p.values)) == 1)
        assert np.all((p.values + p.times) % 2 == 0)
    for a in range(len(K)):
        for b in range(a + 1, len(K)):
            p, q = K[a], K[b]
            t = np.arange(max(p.start, q.start), 81)
            d = p.evaluate(t) - q.evaluate(t)
            hit = np.flatnonzero(d == 0)
            if hit.size:
                assert np.all(d[hit[0]:] == 0)
            s = np.sign(d)
            assert np.all(s[s != 0] == s[s != 0][0]) if np.any(s) else True


def test_far_paths_merge_under_saturated_metric():
    # the compactified metric cannot resolve paths far from the origin, so
    # dedup keeps one of them
    a = Path.constant(30.0, 0.0)
    b = Path.constant(32.0, 0.0)
    assert path_metric(a, b) <= 1e-12
    assert len(PathFamily([a, b])) == 1
    assert len(PathFamily([a, b], tol_dedup=0.0)) == 2


def test_determinism_and_kernel_matches_field():
    sysm = system(seed=99)
    starts = _random_starts(np.random.default_rng(3), 15)
    a = simulate_discrete(sysm, starts, 60)
    b = simulate_discrete(sysm, list(reversed(starts)), 60)
    c = simulate_discrete(sysm, starts, 60, coins=HashedCoinField(sysm))
    assert sorted(p.to_json()["knots"] for p in a) == sorted(p.to_json()["knots"] for p in b)
    assert list(a) == list(c)


def test_marginal_law_and_field_independence():
    vals = []
    for s in range(4000):
        f = HashedCoinField(system(seed=s))
        vals.append((f.increment(0, 0), f.increment(2, 0), f.increment(1, 1)))
    v = np.array(vals, float)
    band = 4 / math.sqrt(len(v))
    assert abs(v[:, 0].mean()) < band
    assert abs(np.corrcoef(v[:, 0], v[:, 1])[0, 1]) < band
    assert abs(np.corrcoef(v[:, 0], v[:, 2])[0, 1]) < band


def test_plus_minus_two_law_never_coalesces():
    law = IncrementLaw.from_pairs([(2, 0.5), (-2, 0.5)])
    for s in range(20):
        p, q = simulate_crossing(system("discrete_crossing", seed=s, law=law), [(0, 0), (1, 0)], 100)
        t = np.arange(101)
        assert np.all(p.evaluate(t) != q.evaluate(t))


def test_simple_law_on_full_lattice_crosses():
    crossed = 0
    for s in range(30):
        p, q = simulate_crossing(system("discrete_crossing", seed=s), [(0, 0), (1, 0)], 100)
        d = p.evaluate(np.arange(101)) - q.evaluate(np.arange(101))
        assert np.all(d != 0)
        crossed += np.any(np.sign(d) != np.sign(d[0]))
    assert crossed > 0


def test_crossing_walks_coalesce_on_landing():
    law = IncrementLaw.from_pairs([(1, 0.25), (-1, 0.25), (0, 0.5)])
    hits = 0
    for s in range(30):
        p, q = simulate_crossing(system("discrete_crossing", seed=s, law=law), [(0, 0), (3, 0)], 100)
        d = p.evaluate(np.arange(101)) - q.evaluate(np.arange(101))
        z = np.flatnonzero(d == 0)
        if z.size:
            hits += 1
            assert np.all(d[z[0]:] == 0)
    assert hits > 0


def test_law_validation():
    with pytest.raises(ValueError):
        IncrementLaw.from_pairs([(3, 0.2), (-1, 0.6), (1, 0.2)])
    with pytest.raises(ValueError):
        IncrementLaw.from_pairs([(0, 1.0)])
    law = IncrementLaw.from_pairs([(3, 0.25), (-1, 0.75)])
    assert law.mean == 0 and law.variance == Fraction(3)
    with pytest.raises(ConfigError):
        system("discrete_parity", law=law)


def test_window_overflow():
    with pytest.raises(WindowOverflowError):
        simulate_discrete(system(x=(-3, 3), t=(0, 400)), [(0, 0)], 400)


def test_json_roundtrip():
    s = system("discrete_crossing", law=IncrementLaw.from_pairs([(2, 0.5), (-2, 0.5)]))
    assert CoalescingSystem.from_json(s.to_json()) == s


def test_scripted_continuous_example():
    clocks = ScriptedClockField({0: [1.0, 5.0], 1: [0.5, 1.7, 9.0]}, {(0, 1.0): 1, (1, 1.7): 1, (1, 0.5): -1})
    sysm = system("continuous_time")
    (p,) = simulate_continuous(sysm, [(0, 0.0)], 1.7, clocks)
    assert knots(p) == [(0, 0), (0, 1.0), (1, 1.7)]


def test_start_on_event_emits_two_paths():
    clocks = ScriptedClockField({0: [1.0, 3.0], 1: [2.5, 9.0], -1: [2.0, 9.0]}, {}, default_direction=1)
    K = simulate_continuous(system("continuous_time"), [(0, 1.0)], 2.0, clocks)
    assert len(K) == 2
    ends = sorted(p(2.0) for p in K)
    assert ends[0] != ends[1]


def test_continuous_shared_future_and_noncrossing():
    sysm = system("continuous_time", seed=5)
    starts = [(i, float(s)) for i, s in [(0, 0.0), (2, 0.3), (-3, 1.1), (5, 0.0), (1, 2.7)]]
    K = list(simulate_continuous(sysm, starts, 40.0))
    t = np.linspace(3, 40, 4000)
    for a in range(len(K)):
        for b in range(a + 1, len(K)):
            d = K[a].evaluate(t) - K[b].evaluate(t)
            z = np.flatnonzero(d == 0)
            if z.size:
                assert np.all(d[z[0]:] == 0)
            s = np.sign(d[d != 0])
            assert s.size == 0 or np.all(s == s[0])
    again = list(simulate_continuous(sysm, starts, 40.0, HashedClockField(sysm)))
    assert again == K


def test_continuous_rate_one():
    f = HashedClockField(system("continuous_time", seed=11))
    gaps, t = [], 0.0
    for _ in range(5000):
        T, _d = f.next_event(0, t)
        gaps.append(T - t)
        t = T
    g = np.array(gaps)
    assert abs(g.mean() - 1) < 4 / math.sqrt(g.size)
    assert abs(g.var() - 1) < 0.15


def test_rescale_examples():
    K = PathFamily([Path.from_knots([(100, 3), (101, 4)])])
    (p,) = rescale(K, 0.1)
    assert p.start == pytest.approx(1.0) and p(1.0) == pytest.approx(0.3)
    assert list(rescale(K, 1.0)) == list(K)
    s = PathFamily([Path.boundary(1, -math.inf)])
    assert list(rescale(s, 0.3)) == list(s)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 3), st.floats(0.05, 3))
def test_rescale_composition(a, b):
    K = simulate_discrete(system(seed=2), [(0, 0), (4, 2)], 20)
    lhs, rhs = rescale(rescale(K, a), b), rescale(K, a * b)
    for p, q in zip(lhs, rhs):
        assert path_metric(p, q) < 1e-9


def test_boundary_paths():
    B = boundary_paths()
    assert len(B) == 4
    assert sum(p.start == -math.inf for p in B) == 2
    for p in B:
        assert path_metric(p, p) == 0
        for t in (-3.0, 0.0, 2.5):
            assert phi(p(t), t) == pytest.approx(p.sentinel / (1 + abs(t)))
    assert len(boundary_paths((0, 3))) == 12
