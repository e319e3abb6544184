"""Keyed min-priority queue with priority updates.

Entries are ordered by ``(priority, seq)`` where ``seq`` is the insertion
counter, so equal priorities pop oldest first.  Every entry is addressed by a
hashable key (the algorithms use ``(trajectory id, ts)``) and may carry an
arbitrary payload.

The heap itself is :mod:`heapq`.  An update pushes a fresh ``(priority, seq,
entry)`` tuple and leaves the old one behind; stale tuples are recognised
(their priority no longer matches the entry, or the entry is gone) and
skipped when they surface.
"""
from __future__ import annotations

import heapq
from typing import Any, Hashable, Iterator, Optional

from .errors import DuplicateEntryError, EmptyQueueError, MissingEntryError


class QueueEntry:
    __slots__ = ("key", "priority", "seq", "item", "live")

    def __init__(self, key, priority, seq, item=None):
        self.key = key
        self.priority = priority
        self.seq = seq
        self.item = item
        self.live = True

    def __lt__(self, other):
        if self.priority != other.priority:
            return self.priority < other.priority
        return self.seq < other.seq

    def __repr__(self):
        return f"QueueEntry(key={self.key!r}, priority={self.priority!r}, seq={self.seq})"


class PriorityQueue:
    """Updatable min-priority queue.

    >>> q = PriorityQueue()
    >>> q.add("a", 3.0); q.add("b", 1.0); q.add("c", 1.0)
    >>> [q.pop_min().key for _ in range(3)]
    ['b', 'c', 'a']
    """

    __slots__ = ("_heap", "_index", "_seq")

    def __init__(self):
        self._heap: list = []
        self._index: dict[Hashable, QueueEntry] = {}
        self._seq = 0

    def __len__(self):
        return len(self._index)

    def size(self) -> int:
        return len(self._index)

    def __contains__(self, key):
        return key in self._index

    def __iter__(self) -> Iterator[QueueEntry]:
        """Live entries, oldest first."""
        return iter(list(self._index.values()))

    def add(self, key: Hashable, priority: float, item: Any = None) -> None:
        if key in self._index:
            raise DuplicateEntryError(key)
        if priority != priority:
            raise ValueError("priority is NaN")
        entry = QueueEntry(key, priority, self._seq, item)
        self._seq += 1
        self._index[key] = entry
        heapq.heappush(self._heap, (priority, entry.seq, entry))

    def _top(self):
        heap = self._heap
        while heap:
            priority, _, entry = heap[0]
            if entry.live and entry.priority == priority:
                return entry
            heapq.heappop(heap)
        return None

    def peek(self) -> QueueEntry:
        entry = self._top()
        if entry is None:
            raise EmptyQueueError("peek into an empty queue")
        return entry

    def min_priority(self) -> Optional[float]:
        entry = self._top()
        return None if entry is None else entry.priority

    def pop_min(self) -> QueueEntry:
        entry = self._top()
        if entry is None:
            raise EmptyQueueError("pop from an empty queue")
        heapq.heappop(self._heap)
        entry.live = False
        del self._index[entry.key]
        return entry

    def remove(self, key: Hashable) -> QueueEntry:
        try:
            entry = self._index.pop(key)
        except KeyError:
            raise MissingEntryError(key) from None
        entry.live = False
        self._compact()
        return entry

    def get(self, key: Hashable) -> QueueEntry:
        try:
            return self._index[key]
        except KeyError:
            raise MissingEntryError(key) from None

    def priority(self, key: Hashable) -> float:
        return self.get(key).priority

    def update_priority(self, key: Hashable, priority: float) -> None:
        try:
            entry = self._index[key]
        except KeyError:
            raise MissingEntryError(key) from None
        if priority != priority:
            raise ValueError("priority is NaN")
        if priority == entry.priority:
            return
        entry.priority = priority
        heapq.heappush(self._heap, (priority, entry.seq, entry))
        self._compact()

    def flush(self) -> list[QueueEntry]:
        """Drop every live entry and return them (oldest first)."""
        entries = list(self._index.values())
        for e in entries:
            e.live = False
        self._heap.clear()
        self._index.clear()
        return entries

    def _compact(self):
        # keep stale tuples from piling up under heavy update traffic
        if len(self._heap) > 2 * len(self._index) + 64:
            self._heap = [(e.priority, e.seq, e) for e in self._index.values()]
            heapq.heapify(self._heap)
