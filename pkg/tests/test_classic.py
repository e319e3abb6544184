import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bwctraj import Trajectory, dead_reckoning, sed, squish, sttrace, tdtr
from bwctraj.classic import (
    SOG_COG,
    TWO_POINT,
    DRConfig,
    SquishConfig,
    STTrace,
    STTraceConfig,
    TDTRConfig,
    tdtr_split_values,
)
from bwctraj.errors import ConfigError, EmptyInputError, OrderingError, SchemaError
from bwctraj.ingest import SynthSpec, merge_stream, synth

from conftest import P, random_trajectory, reference_squish, sed_oracle, traj


def keys(sample):
    return [p.key for p in sample]


def assert_subsequence(sample, original):
    it = iter(original)
    for p in sample:
        assert any(q is p for q in it)


# --- configs ---------------------------------------------------------------

@pytest.mark.parametrize("make", [
    lambda: SquishConfig(1), lambda: STTraceConfig(1), lambda: STTraceConfig(5, "sometimes"),
    lambda: DRConfig(0.0), lambda: DRConfig(1.0, "kalman"), lambda: TDTRConfig(-1.0),
])
def test_invalid_configs(make):
    with pytest.raises(ConfigError):
        make()


# --- Squish ----------------------------------------------------------------

def test_squish_collinear_keeps_endpoints():
    t = traj([(2 * i, i, i) for i in range(5)])
    s = squish(t, 2)
    assert keys(s) == [t[0].key, t[-1].key]


def test_squish_desk_trace():
    t = traj([(0, 0, 0), (5, 3, 5), (10, 0, 10), (12, 0, 12)])
    events = []
    s = squish(t, 3, observer=events.append)
    # at overflow: p1 = SED(p0,p1,p2) = 3, p2 = SED(p1,p2,p3) = 6/7, p3 newest = inf
    assert keys(s) == [t[0].key, t[1].key, t[3].key]
    (ev,) = events
    assert ev.point is t[2]
    assert ev.priority == pytest.approx(6 / 7, abs=1e-12)
    (left, right) = ev.neighbors
    assert left[0] is t[1] and left[1] == pytest.approx(3.0) and left[2] == left[1] + ev.priority
    assert right[0] is t[3] and right[1:] == (math.inf, math.inf)
    assert s.tail.priority == math.inf


def test_squish_short_trajectory_is_lossless():
    t = traj([(0, 0, 0), (1, 5, 1), (2, 0, 2)])
    assert keys(squish(t, 5)) == [p.key for p in t]
    with pytest.raises(EmptyInputError):
        squish([], 3)


@given(st.integers(0, 10_000), st.integers(3, 40), st.integers(2, 12))
def test_squish_recurrence_matches_reference(seed, n, cap):
    rng = np.random.default_rng(seed)
    t = random_trajectory(rng, n)
    events = []
    s = squish(t, cap, observer=events.append)
    ref_pts, ref_log = reference_squish(list(t), cap)
    assert [p.key for p in s] == [p.key for p in ref_pts]
    assert len(events) == len(ref_log)
    for ev, (pt, pr, changes) in zip(events, ref_log):
        assert ev.point is pt and ev.priority == pr
        assert [(q.key, b, a) for q, b, a in ev.neighbors] == [(q.key, b, a) for q, b, a in changes]
        for _, before, after in ev.neighbors:
            assert after == before + ev.priority  # bitwise


@given(st.integers(0, 10_000), st.integers(1, 60), st.integers(2, 20))
def test_squish_size_and_subsequence(seed, n, cap):
    t = random_trajectory(np.random.default_rng(seed), n)
    s = squish(t, cap)
    assert len(s) == min(n, cap)
    assert_subsequence(s, t)
    assert s.head.point is t[0] and s.tail.point is t[-1]


# --- STTrace ---------------------------------------------------------------

def test_sttrace_desk_trace_gate():
    t = traj([(0, 0, 0), (5, 3, 5), (10, 0, 10)])
    # full queue of two inf points: tentative SED(p0,p1,p2) = 3 < inf, so p2 is skipped
    algo = STTrace(2)
    for p in t:
        algo.push(p)
    assert keys(algo.result()[0]) == [t[0].key, t[1].key] and algo.skipped == 1
    # without the gate p2 goes in, p1 (priority 3) is the minimum and leaves
    events = []
    out = sttrace(t, 2, gate="never", observer=events.append)
    assert keys(out[0]) == [t[0].key, t[2].key]
    assert events[0].point is t[1] and events[0].priority == pytest.approx(3.0)
    # both neighbours are sample edges and are re-scored to inf
    assert [(q, a) for q, _, a in events[0].neighbors] == [(t[0], math.inf), (t[2], math.inf)]


def test_sttrace_lossless_when_capacity_suffices():
    t = random_trajectory(np.random.default_rng(1), 25)
    out = sttrace(t, 25)
    assert keys(out[0]) == [p.key for p in t]


def test_sttrace_rejects_unordered_stream():
    with pytest.raises(OrderingError):
        sttrace([P(0, 0, 5, id=0), P(0, 0, 4, id=1)], 4)


def _straight_and_square(seed):
    straight = synth(seed, SynthSpec(1, duration=2000, period=10, model="constant-velocity"))[0]
    # two-step legs: half the points are corners, more than the square's even share of Mn
    square = synth(seed + 1000, SynthSpec(1, duration=2000, period=10, model="square-wave",
                                          leg=2))[0]
    square = Trajectory(1, [P(p.x, p.y, p.ts, id=1) for p in square])
    return {0: straight, 1: square}


@pytest.mark.parametrize("seed", range(10))
def test_sttrace_is_unbalanced(seed):
    data = _straight_and_square(seed)
    total = sum(len(t) for t in data.values())
    out = sttrace(merge_stream(data), int(0.4 * total))
    assert len(out[1]) > len(out[0])


@given(st.integers(0, 10_000), st.integers(2, 30), st.sampled_from(["full", "always", "never"]))
def test_sttrace_capacity_and_exact_priorities(seed, cap, gate):
    rng = np.random.default_rng(seed)
    data = {i: random_trajectory(rng, int(rng.integers(2, 25)), id=i) for i in range(3)}
    algo = STTrace(cap, gate)
    for p in merge_stream(data):
        algo.push(p)
        assert sum(len(s) for s in algo.samples.values()) <= cap
        for e in algo.queue:
            n = e.item
            if n.prev is None or n.next is None:
                assert n.priority == math.inf
            else:
                assert abs(n.priority - sed_oracle(n.prev.point, n.point, n.next.point)) <= 1e-9
    for tid, s in algo.result().items():
        assert_subsequence(s, data[tid])


# --- Dead reckoning --------------------------------------------------------

def test_dr_constant_velocity_keeps_two():
    t = traj([(3 * i, -2 * i, i) for i in range(20)])
    out = dead_reckoning(t, 1.0)
    assert keys(out[0]) == [t[0].key, t[1].key]


def test_dr_turn():
    t = traj([(0, 0, 0), (10, 0, 1), (20, 0, 2), (20, 10, 3)])
    out = dead_reckoning(t, 5.0)
    assert keys(out[0]) == [t[0].key, t[1].key, t[3].key]
    # the kept basis (p0, p1) extrapolates to (30, 0) at t=3
    assert math.hypot(20 - 30, 10 - 0) == pytest.approx(14.1421356, abs=1e-6)


def test_dr_sog_cog_exact_on_straight_motion():
    pts = [P(10.0 * i, 0, i, sog=10.0, cog=0.0) for i in range(10)]
    assert keys(dead_reckoning(pts, 0.5, SOG_COG)[0]) == [pts[0].key]
    north = [P(0, 3.0 * i, i, sog=3.0, cog=math.pi / 2) for i in range(10)]
    assert len(dead_reckoning(north, 0.5, SOG_COG)[0]) == 1


def test_dr_sog_cog_requires_fields():
    with pytest.raises(SchemaError):
        dead_reckoning([P(0, 0, 0), P(1, 0, 1)], 0.5, SOG_COG)


@given(st.integers(0, 10_000), st.floats(1.0, 200.0))
def test_dr_keeps_exactly_the_deviating_points(seed, eps):
    t = random_trajectory(np.random.default_rng(seed), 40)
    kept = dead_reckoning(t, eps)[0].points
    basis = []
    for p in t:
        if not basis:
            assert p is kept[0]
            basis.append(p)
            continue
        last = basis[-1]
        if len(basis) == 1:
            est = (last.x, last.y)
        else:
            b = basis[-2]
            f = (p.ts - last.ts) / (last.ts - b.ts)
            est = (last.x + (last.x - b.x) * f, last.y + (last.y - b.y) * f)
        d = math.hypot(p.x - est[0], p.y - est[1])
        if any(q is p for q in kept):
            assert d > eps - 1e-9
            basis.append(p)
        else:
            assert d <= eps + 1e-9


# --- TD-TR -----------------------------------------------------------------

def tdtr_oracle(points, tol):
    def rec(i, j):
        if j - i < 2:
            return []
        d = [sed_oracle(points[i], points[k], points[j]) for k in range(i + 1, j)]
        m = max(range(len(d)), key=lambda k: (d[k], -k))
        if d[m] <= tol:
            return []
        k = i + 1 + m
        return rec(i, k) + [k] + rec(k, j)

    n = len(points)
    return [0] + rec(0, n - 1) + ([n - 1] if n > 1 else [])


def test_tdtr_examples():
    line = traj([(2 * i, i, i) for i in range(8)])
    assert keys(tdtr(line, 0.0)) == [line[0].key, line[-1].key]
    walk = random_trajectory(np.random.default_rng(3), 15)
    assert keys(tdtr(walk, 0.0)) == [p.key for p in walk]
    with pytest.raises(EmptyInputError):
        tdtr([], 1.0)


@pytest.mark.parametrize("seed", range(20))
def test_tdtr_matches_recursive_oracle(seed):
    t = random_trajectory(np.random.default_rng(seed), 20, scale=5.0)
    want = [t[i].key for i in tdtr_oracle(list(t), 5.0)]
    assert keys(tdtr(t, 5.0)) == want


@given(st.integers(0, 10_000), st.integers(3, 40))
def test_tdtr_split_values_predict_membership(seed, n):
    t = random_trajectory(np.random.default_rng(seed), n)
    thresholds = tdtr_split_values(t)
    for tol in sorted(set(thresholds.values()))[:5] + [0.0]:
        kept = {p.key for p in tdtr(t, tol)}
        for i, thr in thresholds.items():
            assert (t[i].key in kept) == (thr > tol)
