import math

import numpy as np
import pytest
from hypothesis import settings

from bwctraj import Point, Trajectory, sed

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def P(x, y, ts, id=0, sog=None, cog=None):
    return Point(id, float(ts), float(x), float(y), sog, cog)


def traj(coords, id=0):
    """Trajectory from ``(x, y, ts)`` triples."""
    return Trajectory(id, [P(x, y, ts, id) for x, y, ts in coords])


def random_trajectory(rng, n, id=0, step=10.0, scale=50.0):
    ts = np.cumsum(rng.uniform(0.2, 2.0, n)) * step
    xy = np.cumsum(rng.normal(0.0, scale, (n, 2)), axis=0)
    return Trajectory(id, [P(x, y, t, id) for (x, y), t in zip(xy, ts)])


def interp_oracle(points, t):
    """Position at ``t`` from an explicit bracket search, independent of the kernel."""
    for a, b in zip(points, points[1:]):
        if a.ts <= t <= b.ts:
            if t == b.ts:
                return b.x, b.y
            f = (t - a.ts) / (b.ts - a.ts)
            return a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)
    if len(points) == 1 and points[0].ts == t:
        return points[0].x, points[0].y
    raise ValueError(t)


def sed_oracle(a, x, b):
    f = (x.ts - a.ts) / (b.ts - a.ts)
    return math.hypot(x.x - (a.x + f * (b.x - a.x)), x.y - (a.y + f * (b.y - a.y)))


def imp_oracle(a, m, b, raw, eps):
    """Brute-force W-sum: error without ``m`` minus error with ``m``."""
    total, k = 0.0, 1
    while a.ts + k * eps < b.ts:
        t = a.ts + k * eps
        rx, ry = interp_oracle(raw, t)
        wx, wy = interp_oracle([a, m, b], t)
        ox, oy = interp_oracle([a, b], t)
        total += math.hypot(rx - ox, ry - oy) - math.hypot(rx - wx, ry - wy)
        k += 1
    return total


def reference_squish(points, capacity):
    """List-based Squish: linear-scan minimum, FIFO ties, additive neighbour update.

    Returns the kept points and, for every eviction, the neighbour priorities
    before and after it.
    """
    live = []  # [point, priority, seq]
    log = []
    for seq, p in enumerate(points):
        if len(live) >= 2:
            live[-1][1] = sed(live[-2][0], live[-1][0], p)
        live.append([p, math.inf, seq])
        if len(live) > capacity:
            i = min(range(len(live)), key=lambda j: (live[j][1], live[j][2]))
            dropped = live.pop(i)
            changes = []
            for j in (i - 1, i):
                if 0 <= j < len(live):
                    before = live[j][1]
                    live[j][1] = before + dropped[1]
                    changes.append((live[j][0], before, live[j][1]))
            log.append((dropped[0], dropped[1], changes))
    return [e[0] for e in live], log


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
