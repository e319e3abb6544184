"""Domain types and the planar geometry kernel.

Positions are planar meters, timestamps are real seconds.  A :class:`Sample`
is a doubly linked list of :class:`Node` objects so algorithms can drop an
interior point and reach its neighbours in O(1).
"""
from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Tuple

from .errors import (
    DataError,
    EmptyInputError,
    IntegrityError,
    InvalidSegmentError,
    OrderingError,
    OutOfRangeError,
)

INF = math.inf
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, slots=True)
class Point:
    """One timestamped position.

    ``cog`` is in radians with x growing with ``cos(cog)`` and y with
    ``sin(cog)``; ``sog`` is in m/s.
    """

    id: int
    ts: float
    x: float
    y: float
    sog: Optional[float] = None
    cog: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.ts) and math.isfinite(self.x) and math.isfinite(self.y)):
            raise DataError(f"non-finite point {self!r}")
        if self.sog is not None and not self.sog >= 0:
            raise DataError(f"negative or NaN sog {self.sog!r}")
        if self.cog is not None and not (0.0 <= self.cog < TWO_PI):
            raise DataError(f"cog {self.cog!r} outside [0, 2*pi)")

    @property
    def key(self) -> Tuple[int, float]:
        return (self.id, self.ts)

    @property
    def xy(self) -> Tuple[float, float]:
        return (self.x, self.y)


class Trajectory:
    """Time-ordered points of a single object (strictly increasing ts)."""

    __slots__ = ("id", "points")

    def __init__(self, id, points: Iterable[Point]):
        self.id = id
        self.points: Tuple[Point, ...] = tuple(points)
        prev = None
        for p in self.points:
            if p.id != id:
                raise IntegrityError(f"point of trajectory {p.id} inside trajectory {id}")
            if prev is not None and p.ts <= prev.ts:
                if p.ts == prev.ts:
                    raise IntegrityError(f"duplicate timestamp {p.ts} in trajectory {id}")
                raise OrderingError(f"trajectory {id} not time ordered at ts={p.ts}")
            prev = p

    def __len__(self):
        return len(self.points)

    def __iter__(self) -> Iterator[Point]:
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def __repr__(self):
        return f"Trajectory(id={self.id!r}, n={len(self.points)})"

    @property
    def span(self) -> Tuple[float, float]:
        return (self.points[0].ts, self.points[-1].ts)


class Node:
    """A point resident in a :class:`Sample`, with its mutable priority."""

    __slots__ = ("point", "key", "priority", "prev", "next", "sample")

    def __init__(self, point, priority=INF, sample=None):
        self.point = point
        self.key = (point.id, point.ts)
        self.priority = priority
        self.prev: Optional[Node] = None
        self.next: Optional[Node] = None
        self.sample = sample

    def __repr__(self):
        p = self.point
        return f"Node(id={p.id}, ts={p.ts}, priority={self.priority})"


class Sample:
    """Order-preserving subset of a trajectory, held as a linked list."""

    def __init__(self, source_id, points: Iterable[Point] = ()):
        self.source_id = source_id
        self.head: Optional[Node] = None
        self.tail: Optional[Node] = None
        self._len = 0
        for p in points:
            self.append(p)

    def append(self, point: Point, priority: float = INF) -> Node:
        if self.tail is not None and point.ts <= self.tail.point.ts:
            raise OrderingError(
                f"sample {self.source_id}: ts {point.ts} not after {self.tail.point.ts}")
        node = Node(point, priority, self)
        if self.tail is None:
            self.head = self.tail = node
        else:
            node.prev = self.tail
            self.tail.next = node
            self.tail = node
        self._len += 1
        return node

    def remove(self, node: Node) -> None:
        if node.sample is not self:
            raise IntegrityError("node does not belong to this sample")
        if node.prev is None:
            self.head = node.next
        else:
            node.prev.next = node.next
        if node.next is None:
            self.tail = node.prev
        else:
            node.next.prev = node.prev
        node.prev = node.next = None
        node.sample = None
        self._len -= 1

    def nodes(self) -> Iterator[Node]:
        n = self.head
        while n is not None:
            yield n
            n = n.next

    @property
    def points(self) -> list:
        return [n.point for n in self.nodes()]

    def __len__(self):
        return self._len

    def __iter__(self) -> Iterator[Point]:
        return (n.point for n in self.nodes())

    def __repr__(self):
        return f"Sample(source_id={self.source_id!r}, n={self._len})"


def dist(a, b) -> float:
    """Planar Euclidean distance between two objects with ``x``/``y``."""
    return math.hypot(a.x - b.x, a.y - b.y)


def pos(a: Point, b: Point, time: float) -> Tuple[float, float]:
    """Position at ``time`` when moving at constant speed from ``a`` to ``b``."""
    if not a.ts < b.ts:
        raise InvalidSegmentError(f"segment needs a.ts < b.ts (got {a.ts}, {b.ts})")
    if not a.ts <= time <= b.ts:
        raise InvalidSegmentError(f"time {time} outside [{a.ts}, {b.ts}]")
    if time == b.ts:
        return (b.x, b.y)
    dt = time - a.ts
    return (a.x + (b.x - a.x) / (b.ts - a.ts) * dt,
            a.y + (b.y - a.y) / (b.ts - a.ts) * dt)


def sed(a: Point, x: Point, b: Point) -> float:
    """Synchronized Euclidean distance of ``x`` to the segment ``a -> b``."""
    px, py = pos(a, b, x.ts)
    return math.hypot(x.x - px, x.y - py)


def interpolate_at(seq: Sequence[Point], t: float, times: Optional[Sequence[float]] = None):
    """Position of a sample or trajectory at time ``t``.

    Stored points are returned exactly.  ``times`` may hold the precomputed
    timestamps of ``seq`` to avoid rebuilding them on every call.
    """
    if isinstance(seq, (Sample, Trajectory)):
        seq = seq.points
    if not seq:
        raise EmptyInputError("cannot interpolate in an empty sequence")
    if times is None:
        times = [p.ts for p in seq]
    if not times[0] <= t <= times[-1]:
        raise OutOfRangeError(f"t={t} outside [{times[0]}, {times[-1]}]")
    i = bisect_left(times, t)
    hit = seq[i]
    if hit.ts == t:
        return (hit.x, hit.y)
    return pos(seq[i - 1], hit, t)


class StreamGuard:
    """Checks the stream ordering contract point by point."""

    __slots__ = ("last_ts", "last_by_id")

    def __init__(self):
        self.last_ts = -INF
        self.last_by_id: dict = {}

    def check(self, p: Point) -> None:
        if p.ts < self.last_ts:
            raise OrderingError(f"stream goes back in time: {p.ts} after {self.last_ts}")
        prev = self.last_by_id.get(p.id)
        if prev is not None and p.ts <= prev:
            raise IntegrityError(f"trajectory {p.id}: ts {p.ts} not after {prev}")
        self.last_ts = p.ts
        self.last_by_id[p.id] = p.ts


def as_trajectory(t) -> Trajectory:
    if isinstance(t, Trajectory):
        return t
    points = list(t)
    if not points:
        raise EmptyInputError("empty trajectory")
    return Trajectory(points[0].id, points)
