"""Bandwidth-constrained simplifiers.

All four variants share one engine: points stream in, each joins its
trajectory's sample and a single shared priority queue, and whenever the queue
holds more than ``bw`` points the lowest-priority one is dropped.  At every
window boundary the queue is flushed, which makes the points still in it
permanent.  Committed points stay in the samples and keep serving as
neighbours when later points are scored.

Windows are half-open, ``[start + k*delta, start + (k+1)*delta)``, and the
engine and :func:`bwctraj.evaluation.window_histogram` assign points to
windows with the same :meth:`WindowConfig.window_index`, so at most ``bw``
points are ever committed per window.
"""
from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, replace
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - pure-Python fallback
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

from .classic import (
    SOG_COG,
    TWO_POINT,
    PREDICTORS,
    Eviction,
    Observer,
    deviation,
    predict,
    sed_priority,
    squish_evict,
    sttrace_evict,
)
from .core import INF, Node, Point, Sample, StreamGuard, pos
from .errors import ConfigError, DataError, HistoryGapError, InvariantError
from .pqueue import PriorityQueue

INCREASE = "increase"
PRINTED = "printed"


@dataclass(frozen=True)
class WindowConfig:
    """``bw`` points per window of ``delta`` seconds starting at ``start``.

    ``start=None`` means "timestamp of the first streamed point".
    """

    bw: int
    delta: float
    start: Optional[float] = None

    def __post_init__(self):
        if int(self.bw) != self.bw or self.bw < 1:
            raise ConfigError(f"bw must be an integer >= 1, got {self.bw!r}")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ConfigError(f"window duration must be > 0, got {self.delta!r}")
        if self.start is not None and not math.isfinite(self.start):
            raise ConfigError(f"start must be finite, got {self.start!r}")

    def window_index(self, ts: float) -> int:
        return math.floor((ts - self.start) / self.delta)

    def window_start(self, k: int) -> float:
        return self.start + k * self.delta


@dataclass(frozen=True)
class ImpConfig:
    window: WindowConfig
    precision: float
    sign: str = INCREASE

    def __post_init__(self):
        if not (self.precision > 0 and self.precision <= self.window.delta):
            raise ConfigError(
                f"precision must be in (0, delta={self.window.delta}], got {self.precision!r}")
        if self.sign not in (INCREASE, PRINTED):
            raise ConfigError(f"unknown sign convention {self.sign!r}")


class HistoryBuffer:
    """Raw points per trajectory, kept for as long as they can be needed.

    Timestamps and coordinates live in growable numpy arrays so the scoring
    kernel can read a span without copying.
    """

    _INITIAL = 64

    def __init__(self):
        self._pts: Dict[object, list] = {}
        self._arr: Dict[object, np.ndarray] = {}  # rows: ts, x, y
        self._lo: Dict[object, int] = {}
        self._hi: Dict[object, int] = {}

    def append(self, p: Point) -> None:
        tid = p.id
        arr = self._arr.get(tid)
        if arr is None:
            arr = self._arr[tid] = np.empty((3, self._INITIAL))
            self._pts[tid] = []
            self._lo[tid] = self._hi[tid] = 0
        lo, hi = self._lo[tid], self._hi[tid]
        if hi == arr.shape[1]:
            live = hi - lo
            if live * 2 > arr.shape[1]:
                grown = np.empty((3, arr.shape[1] * 2))
                grown[:, :live] = arr[:, lo:hi]
                arr = self._arr[tid] = grown
            else:
                arr[:, :live] = arr[:, lo:hi]
            lo, hi = 0, live
            self._lo[tid] = 0
        arr[0, hi], arr[1, hi], arr[2, hi] = p.ts, p.x, p.y
        self._hi[tid] = hi + 1
        self._pts[tid].append(p)

    def prune(self, tid, keep_from: float) -> None:
        """Forget points of ``tid`` strictly older than ``keep_from``."""
        if tid not in self._arr:
            return
        lo, hi = self._lo[tid], self._hi[tid]
        i = lo + int(np.searchsorted(self._arr[tid][0, lo:hi], keep_from, side="left"))
        if i > lo:
            del self._pts[tid][:i - lo]
            self._lo[tid] = i

    def points(self, tid) -> list:
        return self._pts.get(tid, [])

    def times(self, tid) -> np.ndarray:
        if tid not in self._arr:
            return np.empty(0)
        return self._arr[tid][0, self._lo[tid]:self._hi[tid]]

    def span(self, tid):
        """``(array, lo, hi)``: live history is ``array[:, lo:hi]``."""
        return self._arr[tid], self._lo[tid], self._hi[tid]

    def __len__(self):
        return sum(len(v) for v in self._pts.values())

    def ids(self):
        return self._pts.keys()


def _imp_sum(a: Point, m: Point, b: Point, pts: Sequence[Point], precision: float) -> float:
    """Sum over the sampling grid of error-without-``m`` minus error-with-``m``.

    Reference implementation over point objects; the engine uses
    :func:`_imp_kernel`, which computes the same sum on arrays.
    """
    t0, end = a.ts, b.ts
    times = [p.ts for p in pts]
    if not times or times[0] > t0 or times[-1] < end:
        raise HistoryGapError(
            f"history of trajectory {m.id} does not cover [{t0}, {end}]")
    total = 0.0
    i = bisect_right(times, t0)
    k = 1
    while True:
        t = t0 + k * precision
        if not t < end:
            break
        while times[i] < t:
            i += 1
        raw = (pts[i].x, pts[i].y) if times[i] == t else pos(pts[i - 1], pts[i], t)
        with_m = pos(a, m, t) if t < m.ts else pos(m, b, t)
        without = pos(a, b, t)
        total += (math.hypot(raw[0] - without[0], raw[1] - without[1])
                  - math.hypot(raw[0] - with_m[0], raw[1] - with_m[1]))
        k += 1
    return total


@njit(cache=True)
def _imp_kernel(hist, lo, hi, at, ax, ay, mt, mx, my, bt, bx, by, precision):
    times = hist[0]
    xs = hist[1]
    ys = hist[2]
    # first raw point strictly after at
    left, right = lo, hi
    while left < right:
        mid = (left + right) // 2
        if times[mid] <= at:
            left = mid + 1
        else:
            right = mid
    i = left
    vab_x = (bx - ax) / (bt - at)
    vab_y = (by - ay) / (bt - at)
    vam_x = (mx - ax) / (mt - at)
    vam_y = (my - ay) / (mt - at)
    vmb_x = (bx - mx) / (bt - mt)
    vmb_y = (by - my) / (bt - mt)
    total = 0.0
    k = 1
    while True:
        t = at + k * precision
        if not t < bt:
            break
        while times[i] < t:
            i += 1
        if times[i] == t:
            rx = xs[i]
            ry = ys[i]
        else:
            dt = t - times[i - 1]
            span = times[i] - times[i - 1]
            rx = xs[i - 1] + (xs[i] - xs[i - 1]) / span * dt
            ry = ys[i - 1] + (ys[i] - ys[i - 1]) / span * dt
        dt = t - at
        wx = ax + vab_x * dt
        wy = ay + vab_y * dt
        if t < mt:
            sx = ax + vam_x * dt
            sy = ay + vam_y * dt
        else:
            sx = mx + vmb_x * (t - mt)
            sy = my + vmb_y * (t - mt)
        total += math.sqrt((rx - wx) ** 2 + (ry - wy) ** 2) - math.sqrt((rx - sx) ** 2 + (ry - sy) ** 2)
        k += 1
    return total


def compute_priority_imp(point: Point, sample, traj, precision: float,
                         sign: str = INCREASE) -> float:
    """Reconstruction-error increase caused by dropping ``point`` from ``sample``.

    ``sample`` and ``traj`` are time-ordered point sequences (or
    :class:`~bwctraj.core.Sample`); errors are sampled every ``precision``
    seconds strictly between the point's two sample neighbours.  With
    ``sign="printed"`` the difference is taken the other way round.
    """
    pts = sample.points if isinstance(sample, Sample) else list(sample)
    idx = next((i for i, q in enumerate(pts) if q is point), None)
    if idx is None:
        idx = next((i for i, q in enumerate(pts) if q.ts == point.ts), None)
    if idx is None:
        raise DataError("point is not part of the sample")
    if idx == 0 or idx == len(pts) - 1:
        raise DataError("point needs a neighbour on both sides")
    value = _imp_sum(pts[idx - 1], pts[idx], pts[idx + 1], list(traj), precision)
    return value if sign == INCREASE else -value


class WindowedCompressor:
    """Shared engine; subclasses define how priorities are assigned."""

    name = "bwc"

    def __init__(self, cfg: WindowConfig, observer: Observer = None):
        self.config = cfg
        self.samples: Dict[object, Sample] = {}
        self.queue = PriorityQueue()
        self.observer = observer
        self.window: Optional[int] = None
        self.committed_counts: Dict[int, int] = {}
        self._guard = StreamGuard()
        self._finished = False

    @property
    def window_end(self) -> Optional[float]:
        if self.window is None:
            return None
        return self.config.window_start(self.window + 1)

    def push(self, p: Point) -> None:
        if self._finished:
            raise DataError("compressor already finished")
        self._guard.check(p)
        cfg = self.config
        if cfg.start is None:
            cfg = self.config = replace(cfg, start=p.ts)
        # same arithmetic as WindowConfig.window_index, inlined for speed
        k = math.floor((p.ts - cfg.start) / cfg.delta)
        if k != self.window:
            if k < 0:
                raise DataError(f"point at ts={p.ts} precedes start={cfg.start}")
            if self.window is None:
                self.window = k
            else:
                self._flush()
                self.window = k
                self._on_window(k)
        s = self.samples.get(p.id)
        if s is None:
            s = self.samples[p.id] = Sample(p.id)
        node = s.append(p, INF)
        self._on_append(node)
        self.queue.add(node.key, node.priority, node)
        if len(self.queue) > self.config.bw:
            self._evict()

    def _flush(self):
        flushed = self.queue.flush()
        if len(flushed) > self.config.bw:
            raise InvariantError(
                f"window {self.window}: {len(flushed)} points committed, cap {self.config.bw}")
        if flushed:
            self.committed_counts[self.window] = len(flushed)

    def finish(self) -> Dict[object, Sample]:
        if not self._finished:
            if self.window is not None:
                self._flush()
            self._finished = True
        return self.samples

    def queued_nodes(self):
        return [e.item for e in self.queue]

    def _on_window(self, k):
        pass

    def _on_append(self, node: Node) -> None:
        raise NotImplementedError

    def _evict(self) -> None:
        raise NotImplementedError

    def run(self, stream: Iterable[Point]) -> Dict[object, Sample]:
        for p in stream:
            self.push(p)
        return self.finish()


class _NeighbourScored(WindowedCompressor):
    """Variants whose priority depends on the previous and next sample point."""

    def _score(self, node: Node) -> float:
        return sed_priority(node)

    def _on_append(self, node):
        prev = node.prev
        if prev is not None and prev.key in self.queue:
            prev.priority = self._score(prev)
            self.queue.update_priority(prev.key, prev.priority)


class BWCSquish(_NeighbourScored):
    """Dropping a point adds its priority onto its queued neighbours."""

    name = "bwc-squish"

    def _evict(self):
        squish_evict(self.queue, self.observer)


class BWCSTTrace(_NeighbourScored):
    """Dropping a point recomputes its queued neighbours' SED exactly."""

    name = "bwc-sttrace"

    def _evict(self):
        sttrace_evict(self.queue, self.observer)


class BWCSTTraceImp(_NeighbourScored):
    """Priorities are time-sampled error deltas against the raw trajectory."""

    name = "bwc-sttrace-imp"

    def __init__(self, cfg: ImpConfig, observer: Observer = None):
        super().__init__(cfg.window, observer)
        self.imp = cfg
        self.history = HistoryBuffer()

    def _score(self, node):
        if node.prev is None or node.next is None:
            return INF
        a, m, b = node.prev.point, node.point, node.next.point
        hist, lo, hi = self.history.span(m.id)
        if hist[0, lo] > a.ts or hist[0, hi - 1] < b.ts:
            raise HistoryGapError(
                f"history of trajectory {m.id} does not cover [{a.ts}, {b.ts}]")
        value = _imp_kernel(hist, lo, hi, a.ts, a.x, a.y, m.ts, m.x, m.y,
                            b.ts, b.x, b.y, self.imp.precision)
        return value if self.imp.sign == INCREASE else -value

    def _on_append(self, node):
        self.history.append(node.point)
        super()._on_append(node)

    def _evict(self):
        q = self.queue
        node = q.pop_min().item
        left, right = node.prev, node.next
        node.sample.remove(node)
        touched = []
        for nb in (left, right):
            if nb is not None and nb.key in q:
                before = nb.priority
                nb.priority = self._score(nb)
                q.update_priority(nb.key, nb.priority)
                touched.append((nb.point, before, nb.priority))
        if self.observer is not None:
            self.observer(Eviction(node.point, node.priority, tuple(touched)))

    def _on_window(self, k):
        # Every sample point is committed now; a future left neighbour is
        # never older than a sample's last point.
        horizon = self.config.window_start(k) - self.config.delta
        for tid in list(self.history.ids()):
            tail = self.samples[tid].tail
            keep_from = horizon if tail is None else min(horizon, tail.point.ts)
            self.history.prune(tid, keep_from)


class BWCDR(WindowedCompressor):
    """Priority is the deviation from the dead-reckoning prediction.

    Points without enough kept predecessors for the predictor get priority
    ``inf``.  Dropping a point re-scores the next one or two queued points,
    whose predictions were based on it.
    """

    name = "bwc-dr"

    def __init__(self, cfg: WindowConfig, predictor: str = TWO_POINT,
                 observer: Observer = None):
        if predictor not in PREDICTORS:
            raise ConfigError(f"unknown predictor {predictor!r}")
        super().__init__(cfg, observer)
        self.predictor = predictor

    def _score(self, node: Node) -> float:
        last = node.prev
        before = last.prev if last is not None else None
        est = predict(last.point if last is not None else None,
                      before.point if before is not None else None,
                      node.point.ts, self.predictor)
        return INF if est is None else deviation(node.point, est)

    def _on_append(self, node):
        node.priority = self._score(node)

    def _evict(self):
        q = self.queue
        node = q.pop_min().item
        nxt = node.next
        nxt2 = nxt.next if nxt is not None else None
        node.sample.remove(node)
        touched = []
        for nb in (nxt, nxt2):
            if nb is not None and nb.key in q:
                before = nb.priority
                nb.priority = self._score(nb)
                q.update_priority(nb.key, nb.priority)
                touched.append((nb.point, before, nb.priority))
        if self.observer is not None:
            self.observer(Eviction(node.point, node.priority, tuple(touched)))


def bwc_squish(stream: Iterable[Point], cfg: WindowConfig,
               observer: Observer = None) -> Dict[object, Sample]:
    return BWCSquish(cfg, observer).run(stream)


def bwc_sttrace(stream: Iterable[Point], cfg: WindowConfig,
                observer: Observer = None) -> Dict[object, Sample]:
    return BWCSTTrace(cfg, observer).run(stream)


def bwc_sttrace_imp(stream: Iterable[Point], cfg: ImpConfig,
                    observer: Observer = None) -> Dict[object, Sample]:
    return BWCSTTraceImp(cfg, observer).run(stream)


def bwc_dr(stream: Iterable[Point], cfg: WindowConfig, predictor: str = TWO_POINT,
           observer: Observer = None) -> Dict[object, Sample]:
    return BWCDR(cfg, predictor, observer).run(stream)


__all__ = [
    "WindowConfig", "ImpConfig", "HistoryBuffer", "WindowedCompressor",
    "BWCSquish", "BWCSTTrace", "BWCSTTraceImp", "BWCDR",
    "bwc_squish", "bwc_sttrace", "bwc_sttrace_imp", "bwc_dr",
    "compute_priority_imp", "INCREASE", "PRINTED", "SOG_COG", "TWO_POINT",
]
