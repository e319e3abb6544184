"""Baseline simplifiers: Squish, STTrace, Dead Reckoning and TD-TR."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, NamedTuple, Optional

import numpy as np

from .core import (
    INF,
    Node,
    Point,
    Sample,
    StreamGuard,
    Trajectory,
    as_trajectory,
    dist,
    sed,
)
from .errors import ConfigError, EmptyInputError, InvariantError, SchemaError
from .pqueue import PriorityQueue

TWO_POINT = "two-point"
SOG_COG = "sog-cog"
PREDICTORS = (TWO_POINT, SOG_COG)


class Eviction(NamedTuple):
    """What happened when a point was dropped.

    ``neighbors`` holds ``(point, priority_before, priority_after)`` for each
    queued neighbour whose priority was touched.
    """

    point: Point
    priority: float
    neighbors: tuple


Observer = Optional[Callable[[Eviction], None]]


@dataclass(frozen=True)
class SquishConfig:
    capacity: int

    def __post_init__(self):
        if int(self.capacity) != self.capacity or self.capacity < 2:
            raise ConfigError(f"Squish capacity must be an integer >= 2, got {self.capacity!r}")


@dataclass(frozen=True)
class STTraceConfig:
    capacity: int
    gate: str = "full"

    def __post_init__(self):
        if int(self.capacity) != self.capacity or self.capacity < 2:
            raise ConfigError(f"STTrace capacity must be an integer >= 2, got {self.capacity!r}")
        if self.gate not in ("full", "always", "never"):
            raise ConfigError(f"unknown gate mode {self.gate!r}")


@dataclass(frozen=True)
class DRConfig:
    epsilon: float
    predictor: str = TWO_POINT

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError(f"DR threshold must be > 0, got {self.epsilon!r}")
        if self.predictor not in PREDICTORS:
            raise ConfigError(f"unknown predictor {self.predictor!r}")


@dataclass(frozen=True)
class TDTRConfig:
    tolerance: float

    def __post_init__(self):
        if not self.tolerance >= 0:
            raise ConfigError(f"TD-TR tolerance must be >= 0, got {self.tolerance!r}")


def sed_priority(node: Node) -> float:
    """SED of a resident point w.r.t. its current sample neighbours (inf at edges)."""
    if node.prev is None or node.next is None:
        return INF
    return sed(node.prev.point, node.point, node.next.point)


def predict(last: Optional[Point], before_last: Optional[Point], ts: float, predictor: str):
    """Expected position at ``ts`` from the last one or two kept points.

    Returns ``None`` when there are not enough kept points for the predictor.
    """
    if last is None:
        return None
    dt = ts - last.ts
    if predictor == SOG_COG:
        if last.sog is None or last.cog is None:
            raise SchemaError(f"sog/cog missing on point {last.id}@{last.ts}")
        return (last.x + math.cos(last.cog) * last.sog * dt,
                last.y + math.sin(last.cog) * last.sog * dt)
    if before_last is None:
        return None
    span = last.ts - before_last.ts
    return (last.x + (last.x - before_last.x) / span * dt,
            last.y + (last.y - before_last.y) / span * dt)


def deviation(p: Point, estimate) -> float:
    return math.hypot(p.x - estimate[0], p.y - estimate[1])


def squish(traj, capacity: int, observer: Observer = None) -> Sample:
    """Compress one trajectory to at most ``capacity`` points.

    Dropping a point adds its priority onto both sample neighbours instead of
    recomputing them.
    """
    cfg = SquishConfig(capacity)
    traj = as_trajectory(traj)
    sample = Sample(traj.id)
    q = PriorityQueue()
    for p in traj:
        node = sample.append(p)
        prev = node.prev
        if prev is not None and prev.prev is not None:
            prev.priority = sed(prev.prev.point, prev.point, p)
            q.update_priority(prev.key, prev.priority)
        q.add(p.key, INF, node)
        if len(q) > cfg.capacity:
            squish_evict(q, observer)
    return sample


def squish_evict(q: PriorityQueue, observer: Observer = None) -> Node:
    """Pop the queue minimum and push its priority onto its queued neighbours."""
    node = q.pop_min().item
    dropped = node.priority
    left, right = node.prev, node.next
    node.sample.remove(node)
    touched = []
    for nb in (left, right):
        if nb is not None and nb.key in q:
            before = nb.priority
            nb.priority = before + dropped
            q.update_priority(nb.key, nb.priority)
            touched.append((nb.point, before, nb.priority))
    if observer is not None:
        observer(Eviction(node.point, dropped, tuple(touched)))
    return node


def sttrace_evict(q: PriorityQueue, observer: Observer = None) -> Node:
    """Pop the queue minimum and recompute its queued neighbours' SED exactly."""
    node = q.pop_min().item
    left, right = node.prev, node.next
    node.sample.remove(node)
    touched = []
    for nb in (left, right):
        if nb is not None and nb.key in q:
            before = nb.priority
            nb.priority = sed_priority(nb)
            q.update_priority(nb.key, nb.priority)
            touched.append((nb.point, before, nb.priority))
    if observer is not None:
        observer(Eviction(node.point, node.priority, tuple(touched)))
    return node


class STTrace:
    """Streaming STTrace over many trajectories sharing one buffer.

    ``gate`` controls the "is this point promising" pre-check: ``"full"``
    (default) applies it only once the buffer is full, ``"always"`` whenever
    the queue is non-empty, ``"never"`` disables it.
    """

    def __init__(self, capacity: int, gate: str = "full", observer: Observer = None):
        self.config = STTraceConfig(capacity, gate)
        self.samples: Dict[object, Sample] = {}
        self.queue = PriorityQueue()
        self.observer = observer
        self.skipped = 0
        self._guard = StreamGuard()

    def _interesting(self, p: Point, s: Sample) -> bool:
        gate = self.config.gate
        if gate == "never" or len(self.queue) == 0:
            return True
        if gate == "full" and len(self.queue) < self.config.capacity:
            return True
        if s.tail is None or s.tail.prev is None:
            return True
        tentative = sed(s.tail.prev.point, s.tail.point, p)
        return not tentative < self.queue.min_priority()

    def push(self, p: Point) -> None:
        self._guard.check(p)
        s = self.samples.get(p.id)
        if s is None:
            s = self.samples[p.id] = Sample(p.id)
        if not self._interesting(p, s):
            self.skipped += 1
            return
        node = s.append(p)
        prev = node.prev
        if prev is not None and prev.key in self.queue:
            prev.priority = sed_priority(prev)
            self.queue.update_priority(prev.key, prev.priority)
        self.queue.add(p.key, INF, node)
        if len(self.queue) > self.config.capacity:
            sttrace_evict(self.queue, self.observer)
        if len(self.queue) > self.config.capacity:
            raise InvariantError("STTrace buffer above capacity")

    def result(self) -> Dict[object, Sample]:
        return self.samples


def sttrace(stream: Iterable[Point], capacity: int, gate: str = "full",
            observer: Observer = None) -> Dict[object, Sample]:
    algo = STTrace(capacity, gate, observer)
    for p in stream:
        algo.push(p)
    return algo.result()


def dead_reckoning(stream: Iterable[Point], epsilon: float,
                   predictor: str = TWO_POINT) -> Dict[object, Sample]:
    """Keep a point when it deviates more than ``epsilon`` from its prediction.

    Predictions use the last one or two *kept* points.  With a single kept
    point the two-point predictor assumes the object stands still.
    """
    cfg = DRConfig(epsilon, predictor)
    guard = StreamGuard()
    samples: Dict[object, Sample] = {}
    for p in stream:
        guard.check(p)
        s = samples.get(p.id)
        if s is None:
            s = samples[p.id] = Sample(p.id)
        if s.tail is None:
            s.append(p)
            continue
        last = s.tail.point
        before = s.tail.prev.point if s.tail.prev is not None else None
        est = predict(last, before, p.ts, cfg.predictor)
        if est is None:
            est = (last.x, last.y)
        if deviation(p, est) > cfg.epsilon:
            s.append(p)
    return samples


def tdtr(traj, tolerance: float) -> Sample:
    """Top-down time-ratio simplification.

    Recursively splits at the point of maximum SED w.r.t. the current
    segment's endpoints until every point is within ``tolerance``.  Ties on
    the maximum go to the earliest point.
    """
    cfg = TDTRConfig(tolerance)
    traj = as_trajectory(traj)
    pts = traj.points
    n = len(pts)
    if n == 0:
        raise EmptyInputError("empty trajectory")
    ts = np.fromiter((p.ts for p in pts), float, n)
    x = np.fromiter((p.x for p in pts), float, n)
    y = np.fromiter((p.y for p in pts), float, n)
    keep = {0, n - 1}
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        dt = ts[i + 1:j] - ts[i]
        span = ts[j] - ts[i]
        px = x[i] + (x[j] - x[i]) / span * dt
        py = y[i] + (y[j] - y[i]) / span * dt
        d = np.hypot(x[i + 1:j] - px, y[i + 1:j] - py)
        m = int(np.argmax(d))
        if d[m] > cfg.tolerance:
            k = i + 1 + m
            keep.add(k)
            stack.append((k, j))
            stack.append((i, k))
    return Sample(traj.id, (pts[k] for k in sorted(keep)))


def squish_all(trajectories: Dict[object, Trajectory], capacities) -> Dict[object, Sample]:
    """Run Squish per trajectory; ``capacities`` is an int or a mapping id -> int."""
    out = {}
    for tid, t in trajectories.items():
        cap = capacities[tid] if isinstance(capacities, dict) else capacities
        out[tid] = squish(t, cap)
    return out


def tdtr_all(trajectories: Dict[object, Trajectory], tolerance: float) -> Dict[object, Sample]:
    return {tid: tdtr(t, tolerance) for tid, t in trajectories.items()}


def tdtr_split_values(traj) -> dict:
    """Tolerance below which each interior point is kept by :func:`tdtr`.

    The split tree does not depend on the tolerance, so a point survives
    exactly when every split on its path (itself included) has a maximum SED
    above the tolerance.  Returns ``{index: threshold}``.
    """
    traj = as_trajectory(traj)
    pts = traj.points
    n = len(pts)
    ts = np.fromiter((p.ts for p in pts), float, n)
    x = np.fromiter((p.x for p in pts), float, n)
    y = np.fromiter((p.y for p in pts), float, n)
    out = {}
    stack = [(0, n - 1, INF)]
    while stack:
        i, j, cap = stack.pop()
        if j - i < 2:
            continue
        dt = ts[i + 1:j] - ts[i]
        span = ts[j] - ts[i]
        px = x[i] + (x[j] - x[i]) / span * dt
        py = y[i] + (y[j] - y[i]) / span * dt
        d = np.hypot(x[i + 1:j] - px, y[i + 1:j] - py)
        m = int(np.argmax(d))
        k = i + 1 + m
        eff = min(cap, float(d[m]))
        out[k] = eff
        stack.append((k, j, eff))
        stack.append((i, k, eff))
    return out
