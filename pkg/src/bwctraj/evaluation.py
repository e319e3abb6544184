"""Accuracy metric, per-window point counts and comparison tables."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from . import bwc, classic
from .core import Sample, Trajectory
from .errors import ConfigError, DegenerateSpanError, IntegrityError
from .ingest import merge_stream

CLASSIC = ("squish", "sttrace", "dr", "tdtr")
BWC = ("bwc-squish", "bwc-sttrace", "bwc-sttrace-imp", "bwc-dr")
ALGORITHMS = CLASSIC + BWC

REPORT_COLUMNS = ("algorithm", "ratio", "interval_s", "mean_error_m", "max_window_count",
                  "bw", "delta_s", "wall_ms", "mean_error_traj_m")
HISTOGRAM_COLUMNS = ("window_index", "window_start_ts", "count")


@dataclass
class AccuracyReport:
    interval: float
    per_trajectory: Dict[object, float]
    counts: Dict[object, int]
    mean: float
    mean_by_trajectory: float
    ratio: float
    empty: List[object] = field(default_factory=list)


@dataclass
class WindowHistogram:
    delta: float
    start: float
    counts: List[int]
    bw: Optional[int] = None

    @property
    def max_count(self) -> int:
        return max(self.counts, default=0)

    def violations(self) -> List[int]:
        if self.bw is None:
            return []
        return [k for k, c in enumerate(self.counts) if c > self.bw]


def default_interval(trajectories: Mapping[object, Trajectory]) -> float:
    """Smallest per-trajectory median gap between raw points."""
    gaps = []
    for t in trajectories.values():
        if len(t) >= 2:
            ts = np.fromiter((p.ts for p in t), float, len(t))
            gaps.append(float(np.median(np.diff(ts))))
    if not gaps:
        raise DegenerateSpanError("no trajectory with two points")
    return min(gaps)


def _check_subsequence(orig: Trajectory, sample_pts):
    by_ts = {p.ts: p for p in orig}
    last = -math.inf
    for p in sample_pts:
        q = by_ts.get(p.ts)
        if q is None or (q.x, q.y) != (p.x, p.y):
            raise IntegrityError(f"sample point {p.id}@{p.ts} not in original trajectory")
        if p.ts <= last:
            raise IntegrityError(f"sample {p.id} not time ordered")
        last = p.ts


def trajectory_errors(orig: Trajectory, sample_pts: Sequence, interval: float) -> np.ndarray:
    """Synchronized distances on a regular grid over the sample's time span."""
    st = np.array([p.ts for p in sample_pts], float)
    sx = np.array([p.x for p in sample_pts], float)
    sy = np.array([p.y for p in sample_pts], float)
    ot = np.fromiter((p.ts for p in orig), float, len(orig))
    ox = np.fromiter((p.x for p in orig), float, len(orig))
    oy = np.fromiter((p.y for p in orig), float, len(orig))
    n = int(math.floor((st[-1] - st[0]) / interval)) + 1
    grid = st[0] + np.arange(n) * interval
    grid = grid[grid <= st[-1]]
    return np.hypot(np.interp(grid, ot, ox) - np.interp(grid, st, sx),
                    np.interp(grid, ot, oy) - np.interp(grid, st, sy))


def accuracy(originals: Mapping[object, Trajectory], samples: Mapping[object, object],
             interval: Optional[float] = None) -> AccuracyReport:
    """Mean synchronized distance between originals and their samples.

    Each trajectory is evaluated every ``interval`` seconds from its sample's
    first to last timestamp.  ``mean`` weights trajectories by their number of
    evaluation instants, ``mean_by_trajectory`` weights them equally.  Empty
    samples are skipped and listed in ``empty``.
    """
    if interval is None:
        interval = default_interval(originals)
    if not interval > 0:
        raise ConfigError(f"interval must be > 0, got {interval!r}")
    per, counts, empty = {}, {}, []
    total_err = 0.0
    kept = raw = 0
    for tid, s in samples.items():
        if tid not in originals:
            raise IntegrityError(f"sample {tid!r} has no original trajectory")
        orig = originals[tid]
        pts = s.points if isinstance(s, Sample) else list(s)
        raw += len(orig)
        kept += len(pts)
        if not pts:
            empty.append(tid)
            continue
        _check_subsequence(orig, pts)
        errs = trajectory_errors(orig, pts, interval)
        per[tid] = float(errs.mean())
        counts[tid] = len(errs)
        total_err += float(errs.sum())
    missing = [tid for tid in originals if tid not in samples]
    raw += sum(len(originals[tid]) for tid in missing)
    empty.extend(missing)
    n = sum(counts.values())
    if n == 0:
        raise DegenerateSpanError("no sample has points to evaluate")
    return AccuracyReport(
        interval=interval,
        per_trajectory=per,
        counts=counts,
        mean=total_err / n,
        mean_by_trajectory=float(np.mean(list(per.values()))),
        ratio=kept / raw if raw else 0.0,
        empty=empty,
    )


def window_histogram(samples: Mapping[object, object], cfg, end: Optional[float] = None,
                     bw: Optional[int] = None) -> WindowHistogram:
    """Committed points per time window, summed over all samples.

    ``cfg`` is a :class:`~bwctraj.bwc.WindowConfig` (its ``bw`` is recorded
    for reference) or a bare window duration.  ``end`` extends the histogram
    to cover a stream that outlasts the samples.
    """
    if not isinstance(cfg, bwc.WindowConfig):
        cfg = bwc.WindowConfig(bw or 1, float(cfg), None)
        bw_ref = bw
    else:
        bw_ref = cfg.bw if bw is None else bw
    ts = [p.ts for s in samples.values() for p in s]
    start = cfg.start
    if start is None:
        start = min(ts) if ts else 0.0
        cfg = bwc.WindowConfig(cfg.bw, cfg.delta, start)
    last = max(ts + ([end] if end is not None else []), default=start)
    n_bins = cfg.window_index(last) + 1 if (ts or end is not None) else 0
    counts = [0] * n_bins
    for t in ts:
        counts[cfg.window_index(t)] += 1
    return WindowHistogram(cfg.delta, start, counts, bw_ref)


def stream_span(trajectories: Mapping[object, Trajectory]):
    first = min(t[0].ts for t in trajectories.values())
    last = max(t[-1].ts for t in trajectories.values())
    return first, last


def _calibrate(count_for, target: int, lo: float, hi: float, iters: int = 40) -> float:
    """Geometric bisection for a decreasing count(threshold); returns the best threshold."""
    best, best_gap = hi, math.inf
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        c = count_for(mid)
        gap = abs(c - target)
        if gap < best_gap or (gap == best_gap and mid < best):
            best, best_gap = mid, gap
        if gap <= max(1, 0.005 * target):
            break
        if c > target:
            lo = mid
        else:
            hi = mid
    return best


def tdtr_tolerance_for(trajectories: Mapping[object, Trajectory], target: int) -> float:
    """Tolerance making TD-TR keep as close to ``target`` points as ties allow."""
    values = []
    fixed = 0
    for t in trajectories.values():
        fixed += min(len(t), 2)
        values.extend(classic.tdtr_split_values(t).values())
    extra = target - fixed
    values.sort(reverse=True)
    if extra <= 0 or not values:
        return values[0] if values else 0.0
    if extra >= len(values):
        return 0.0
    # keep the `extra` largest values: tolerance sits at the next one down
    return values[extra]


def dr_epsilon_for(trajectories: Mapping[object, Trajectory], target: int,
                   predictor: str = classic.TWO_POINT) -> float:
    stream = list(merge_stream(trajectories))
    xs = [p.x for p in stream]
    ys = [p.y for p in stream]
    extent = math.hypot(max(xs) - min(xs), max(ys) - min(ys)) or 1.0

    def count(eps):
        return sum(len(s) for s in classic.dead_reckoning(stream, eps, predictor).values())

    return _calibrate(count, target, extent * 1e-9, extent * 2)


def derive_params(algorithm: str, trajectories: Mapping[object, Trajectory], ratio: float,
                  delta: Optional[float] = None, precision: Optional[float] = None,
                  predictor: str = classic.TWO_POINT) -> dict:
    """Parameters making ``algorithm`` keep about ``ratio`` of all points.

    Capacities follow the ratio directly (per trajectory for Squish, global
    for STTrace, per window for the BWC family: ``ratio * total * delta /
    duration``).  DR and TD-TR thresholds are calibrated by search.
    """
    if not 0 < ratio <= 1:
        raise ConfigError(f"ratio must be in (0, 1], got {ratio!r}")
    total = sum(len(t) for t in trajectories.values())
    target = max(1, round(ratio * total))
    if algorithm == "squish":
        return {"capacity": {tid: max(2, math.ceil(ratio * len(t)))
                             for tid, t in trajectories.items()}}
    if algorithm == "sttrace":
        return {"capacity": max(2, target)}
    if algorithm == "dr":
        return {"epsilon": dr_epsilon_for(trajectories, target, predictor), "predictor": predictor}
    if algorithm == "tdtr":
        return {"tolerance": tdtr_tolerance_for(trajectories, target)}
    if algorithm in BWC:
        if delta is None:
            raise ConfigError(f"{algorithm} needs a window duration")
        first, last = stream_span(trajectories)
        duration = max(last - first, delta)
        params = {"bw": max(1, round(ratio * total * delta / duration)),
                  "delta": delta, "start": first}
        if algorithm == "bwc-sttrace-imp":
            if precision is None:
                precision = min(default_interval(trajectories), delta)
            params["precision"] = precision
        if algorithm == "bwc-dr":
            params["predictor"] = predictor
        return params
    raise ConfigError(f"unknown algorithm {algorithm!r}")


def run_algorithm(algorithm: str, trajectories: Mapping[object, Trajectory],
                  params: dict) -> Dict[object, Sample]:
    """Run one named algorithm over a set of trajectories."""
    p = dict(params)
    try:
        if algorithm == "squish":
            return classic.squish_all(trajectories, p["capacity"])
        if algorithm == "tdtr":
            return classic.tdtr_all(trajectories, p["tolerance"])
        stream = merge_stream(trajectories)
        if algorithm == "sttrace":
            return classic.sttrace(stream, p["capacity"], p.get("gate", "full"))
        if algorithm == "dr":
            return classic.dead_reckoning(stream, p["epsilon"],
                                          p.get("predictor", classic.TWO_POINT))
        if algorithm in BWC:
            win = bwc.WindowConfig(p["bw"], p["delta"], p.get("start"))
            if algorithm == "bwc-squish":
                return bwc.bwc_squish(stream, win)
            if algorithm == "bwc-sttrace":
                return bwc.bwc_sttrace(stream, win)
            if algorithm == "bwc-sttrace-imp":
                imp = bwc.ImpConfig(win, p["precision"], p.get("sign", bwc.INCREASE))
                return bwc.bwc_sttrace_imp(stream, imp)
            return bwc.bwc_dr(stream, win, p.get("predictor", classic.TWO_POINT))
    except KeyError as e:
        raise ConfigError(f"{algorithm} is missing parameter {e.args[0]!r}") from None
    raise ConfigError(f"unknown algorithm {algorithm!r}")


def compare(trajectories: Mapping[object, Trajectory], configs: Iterable, interval=None,
            delta: Optional[float] = None, timing: bool = True) -> List[dict]:
    """Run each ``(algorithm, params)`` pair and tabulate the results.

    ``delta`` sets the window used for ``max_window_count`` of algorithms
    without their own window.  With ``timing=False`` the ``wall_ms`` column is
    left empty so repeated runs produce identical tables.
    """
    if interval is None:
        interval = default_interval(trajectories)
    first, last = stream_span(trajectories)
    rows = []
    for algorithm, params in configs:
        t0 = time.perf_counter()
        samples = run_algorithm(algorithm, trajectories, params)
        wall = (time.perf_counter() - t0) * 1000.0
        rep = accuracy(trajectories, samples, interval)
        win_delta = params.get("delta", delta)
        bw = params.get("bw")
        max_count = None
        if win_delta is not None:
            cfg = bwc.WindowConfig(bw or 1, win_delta, params.get("start", first))
            max_count = window_histogram(samples, cfg, end=last).max_count
            if bw is not None and max_count > bw:
                raise IntegrityError(f"{algorithm}: {max_count} points in one window, cap {bw}")
        rows.append({
            "algorithm": algorithm,
            "ratio": rep.ratio,
            "interval_s": interval,
            "mean_error_m": rep.mean,
            "max_window_count": max_count,
            "bw": bw,
            "delta_s": win_delta,
            "wall_ms": wall if timing else None,
            "mean_error_traj_m": rep.mean_by_trajectory,
        })
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_report_csv(rows: Iterable[dict], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in REPORT_COLUMNS])


def write_histogram_csv(hist: WindowHistogram, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(HISTOGRAM_COLUMNS)
    for k, c in enumerate(hist.counts):
        w.writerow([k, _fmt(float(hist.start + k * hist.delta)), c])


def write_accuracy_csv(report: AccuracyReport, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("trajectory_id", "n_timestamps", "mean_error_m"))
    for tid in sorted(report.per_trajectory, key=str):
        w.writerow([tid, report.counts[tid], _fmt(report.per_trajectory[tid])])
    w.writerow(["ALL", sum(report.counts.values()), _fmt(report.mean)])
    w.writerow(["ALL_TRAJ_WEIGHTED", len(report.counts), _fmt(report.mean_by_trajectory)])


def format_table(rows: Sequence[dict]) -> str:
    """Fixed-width text rendering of :func:`compare` rows."""
    cols = ("algorithm", "ratio", "mean_error_m", "max_window_count", "bw", "delta_s", "wall_ms")
    cells = [[_fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) if cells else len(c)
              for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) if i else v.ljust(w) for i, (v, w) in enumerate(zip(row, widths)))
              for row in cells]
    return "\n".join(lines)
