"""CSV ingestion, lat/lon projection, stream merging and synthetic data.

The native CSV layout is ``id,ts,x,y[,sog,cog]`` with planar meters, epoch
seconds, sog in m/s and cog in radians (x grows with ``cos(cog)``).  Other
layouts, such as AIS exports with latitude/longitude, knots and compass
degrees, are described by a small ``key = value`` schema file::

    id = MMSI
    timestamp = # Timestamp
    timestamp_format = %d/%m/%Y %H:%M:%S
    lat = Latitude
    lon = Longitude
    sog = SOG
    sog_unit = knots
    cog = COG
    cog_unit = compass-deg
"""
from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from itertools import count
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional

import numpy as np

from .core import TWO_PI, Point, Trajectory
from .errors import ConfigError, IntegrityError, ParseError, SchemaError

EARTH_RADIUS = 6371000.0
KNOT = 1852.0 / 3600.0

SOG_UNITS = {"m/s": 1.0, "mps": 1.0, "knots": KNOT, "kn": KNOT, "km/h": 1000.0 / 3600.0}
COG_UNITS = ("rad", "compass-deg")


@dataclass
class Schema:
    """Column mapping and units of an input CSV."""

    id: str = "id"
    timestamp: str = "ts"
    timestamp_format: str = "auto"
    x: Optional[str] = "x"
    y: Optional[str] = "y"
    lat: Optional[str] = None
    lon: Optional[str] = None
    sog: Optional[str] = None
    cog: Optional[str] = None
    sog_unit: str = "m/s"
    cog_unit: str = "rad"
    delimiter: str = ","

    def __post_init__(self):
        if self.sog_unit not in SOG_UNITS:
            raise ConfigError(f"unknown sog unit {self.sog_unit!r}")
        if self.cog_unit not in COG_UNITS:
            raise ConfigError(f"unknown cog unit {self.cog_unit!r}")
        if (self.lat is None) != (self.lon is None):
            raise ConfigError("lat and lon must be declared together")

    @property
    def geographic(self) -> bool:
        return self.lat is not None

    @classmethod
    def from_file(cls, path) -> "Schema":
        known = {f.name for f in fields(cls)}
        values = {}
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ParseError(f"expected 'key = value' in schema {path}", n)
                key, value = (s.strip() for s in line.split("=", 1))
                if key not in known:
                    raise ParseError(f"unknown schema key {key!r}", n)
                values[key] = None if value.lower() in ("", "none") else value
        if "lat" in values:
            values.setdefault("x", None)
            values.setdefault("y", None)
        return cls(**values)


@dataclass
class RawRecord:
    id: object
    ts: float
    line: int
    lat: Optional[float] = None
    lon: Optional[float] = None
    x: Optional[float] = None
    y: Optional[float] = None
    sog: Optional[float] = None
    cog: Optional[float] = None
    row: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class ProjectionSpec:
    """Local equirectangular projection around a reference point."""

    ref_lat: float
    ref_lon: float

    def __post_init__(self):
        if not (math.isfinite(self.ref_lat) and math.isfinite(self.ref_lon)):
            raise ConfigError("projection reference must be finite")

    @classmethod
    def centroid(cls, records: Iterable[RawRecord]) -> "ProjectionSpec":
        lats, lons = [], []
        for r in records:
            lats.append(r.lat)
            lons.append(r.lon)
        if not lats:
            raise ConfigError("cannot take the centroid of no records")
        return cls(float(np.mean(lats)), float(np.mean(lons)))

    def forward(self, lat: float, lon: float):
        x = EARTH_RADIUS * math.cos(math.radians(self.ref_lat)) * math.radians(lon - self.ref_lon)
        y = EARTH_RADIUS * math.radians(lat - self.ref_lat)
        return x, y

    def inverse(self, x: float, y: float):
        lat = self.ref_lat + math.degrees(y / EARTH_RADIUS)
        lon = self.ref_lon + math.degrees(x / (EARTH_RADIUS * math.cos(math.radians(self.ref_lat))))
        return lat, lon


def parse_timestamp(value: str, fmt: str = "auto") -> float:
    value = value.strip()
    if fmt in ("auto", "epoch"):
        try:
            return float(value)
        except ValueError:
            if fmt == "epoch":
                raise
    if fmt in ("auto", "iso"):
        dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    else:
        dt = datetime.strptime(value, fmt)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def compass_to_math(deg: float) -> float:
    """Compass course (0 = north, clockwise) to radians with 0 = east, counter-clockwise."""
    return math.radians(90.0 - deg) % TWO_PI


def _parse_id(value: str):
    try:
        return int(value)
    except ValueError:
        return value


def _float(row, col, line, what):
    raw = row.get(col)
    if raw is None or raw.strip() == "":
        raise ParseError(f"missing {what} ({col!r})", line)
    try:
        v = float(raw)
    except ValueError:
        raise ParseError(f"bad {what} {raw!r}", line) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite {what} {raw!r}", line)
    return v


def _optional(row, col, line, what):
    if col is None:
        return None
    raw = row.get(col)
    if raw is None or raw.strip() == "":
        return None
    return _float(row, col, line, what)


def read_records(path, schema: Optional[Schema] = None) -> List[RawRecord]:
    """Parse every row into a :class:`RawRecord`, checking ranges and units."""
    schema = schema or Schema()
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=schema.delimiter)
        header = reader.fieldnames or []
        needed = [schema.id, schema.timestamp]
        needed += [schema.lat, schema.lon] if schema.geographic else [schema.x, schema.y]
        missing = [c for c in needed if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        for c in (schema.sog, schema.cog):
            if c is not None and c not in header:
                raise SchemaError(f"{path}: missing column {c!r}")
        for row in reader:
            line = reader.line_num
            tid = row.get(schema.id)
            if tid is None or tid.strip() == "":
                raise ParseError("missing id", line)
            try:
                ts = parse_timestamp(row.get(schema.timestamp) or "", schema.timestamp_format)
            except ValueError:
                raise ParseError(f"bad timestamp {row.get(schema.timestamp)!r}", line) from None
            rec = RawRecord(_parse_id(tid.strip()), ts, line, row=row)
            if schema.geographic:
                rec.lat = _float(row, schema.lat, line, "latitude")
                rec.lon = _float(row, schema.lon, line, "longitude")
                if not -90.0 <= rec.lat <= 90.0:
                    raise ParseError(f"latitude {rec.lat} out of [-90, 90]", line)
                if not -180.0 <= rec.lon <= 180.0:
                    raise ParseError(f"longitude {rec.lon} out of [-180, 180]", line)
            else:
                rec.x = _float(row, schema.x, line, "x")
                rec.y = _float(row, schema.y, line, "y")
            sog = _optional(row, schema.sog, line, "sog")
            if sog is not None:
                if sog < 0:
                    raise ParseError(f"negative sog {sog}", line)
                rec.sog = sog * SOG_UNITS[schema.sog_unit]
            cog = _optional(row, schema.cog, line, "cog")
            if cog is not None:
                rec.cog = compass_to_math(cog) if schema.cog_unit == "compass-deg" else cog % TWO_PI
            records.append(rec)
    return records


def project(records: List[RawRecord], spec: Optional[ProjectionSpec] = None) -> List[Point]:
    """Turn records into planar points, projecting lat/lon when present."""
    geo = [r for r in records if r.lat is not None]
    if geo and spec is None:
        spec = ProjectionSpec.centroid(geo)
    out = []
    for r in records:
        if r.lat is not None:
            x, y = spec.forward(r.lat, r.lon)
        else:
            x, y = r.x, r.y
        out.append(Point(r.id, r.ts, x, y, r.sog, r.cog))
    return out


def group_trajectories(points: Iterable[Point], lines: Optional[List[int]] = None
                       ) -> Dict[object, Trajectory]:
    """Group points by id and sort by time; duplicate timestamps are rejected."""
    groups: Dict[object, list] = {}
    for i, p in enumerate(points):
        groups.setdefault(p.id, []).append((p.ts, lines[i] if lines else i, p))
    out = {}
    for tid in _sorted_ids(groups):
        rows = sorted(groups[tid], key=lambda r: (r[0], r[1]))
        for a, b in zip(rows, rows[1:]):
            if a[0] == b[0]:
                raise IntegrityError(
                    f"trajectory {tid!r}: duplicate timestamp {a[0]} on rows {a[1]} and {b[1]}")
        out[tid] = Trajectory(tid, [r[2] for r in rows])
    return out


def load_csv(path, schema: Optional[Schema] = None,
             projection: Optional[ProjectionSpec] = None) -> Dict[object, Trajectory]:
    records = read_records(path, schema)
    points = project(records, projection)
    return group_trajectories(points, [r.line for r in records])


def _sorted_ids(ids):
    try:
        return sorted(ids)
    except TypeError:
        return sorted(ids, key=str)


def merge_stream(trajectories) -> Iterator[Point]:
    """Merge trajectories into one stream ordered by (ts, id, position)."""
    if isinstance(trajectories, Mapping):
        items = [trajectories[k] for k in _sorted_ids(trajectories)]
    else:
        items = list(trajectories)
        ids = [t.id if isinstance(t, Trajectory) else (t[0].id if len(t) else None) for t in items]
        order = {tid: i for i, tid in enumerate(_sorted_ids(set(ids)))}
        items = [t for _, t in sorted(zip(ids, items), key=lambda z: order[z[0]])]
    return heapq.merge(*items, key=lambda p: p.ts)


def write_points_csv(points: Iterable[Point], fh, with_motion: bool = True) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("id", "ts", "x", "y", "sog", "cog") if with_motion else ("id", "ts", "x", "y"))
    for p in points:
        row = [p.id, repr(float(p.ts)), repr(float(p.x)), repr(float(p.y))]
        if with_motion:
            row += ["" if p.sog is None else repr(float(p.sog)),
                    "" if p.cog is None else repr(float(p.cog))]
        w.writerow(row)


def write_trajectories_csv(trajectories: Mapping[object, Trajectory], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_points_csv(merge_stream(trajectories), fh)


def write_kept_csv(path_in, path_out, kept_keys, schema: Optional[Schema] = None) -> int:
    """Copy the input rows whose (id, ts) is in ``kept_keys``, adding ``kept=1``."""
    schema = schema or Schema()
    n = 0
    with open(path_in, newline="", encoding="utf-8") as src, \
            open(path_out, "w", newline="", encoding="utf-8") as dst:
        reader = csv.DictReader(src, delimiter=schema.delimiter)
        writer = csv.DictWriter(dst, fieldnames=list(reader.fieldnames) + ["kept"],
                                delimiter=schema.delimiter, lineterminator="\n")
        writer.writeheader()
        for row in reader:
            key = (_parse_id(row[schema.id].strip()),
                   parse_timestamp(row[schema.timestamp], schema.timestamp_format))
            if key in kept_keys:
                writer.writerow({**row, "kept": 1})
                n += 1
    return n


MODELS = ("constant-velocity", "random-walk", "square-wave", "burst", "mixed")


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic generator.

    ``burst`` trajectories put ``burst_fraction`` of their points inside
    ``[burst_start, burst_start + burst_duration)``; ``mixed`` alternates
    random-walk and square-wave trajectories.  Regular clocks are perturbed by
    up to ``jitter`` sampling periods either way, as real receivers are.
    """

    n_trajectories: int = 10
    duration: float = 3600.0
    period: float = 10.0
    model: str = "random-walk"
    speed: float = 5.0
    turn_sigma: float = 0.3
    leg: int = 6
    burst_start: Optional[float] = None
    burst_duration: float = 300.0
    burst_fraction: float = 0.85
    jitter: float = 0.3

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown motion model {self.model!r}")
        if self.n_trajectories < 1 or not self.duration > 0 or not self.period > 0:
            raise ConfigError("synth needs positive n_trajectories, duration and period")
        if self.period > self.duration:
            raise ConfigError("period longer than duration")
        if not 0 <= self.jitter < 0.5:
            raise ConfigError("jitter must be in [0, 0.5) periods")
        if self.model == "burst" and not self.burst_duration < self.duration:
            raise ConfigError("burst must be shorter than the whole duration")


def _uniform_times(rng, n, t0, t1):
    """n strictly increasing times evenly spread over [t0, t1) with a random phase."""
    step = (t1 - t0) / n
    return t0 + (np.arange(n) + rng.uniform(0.05, 0.95)) * step


def _burst_times(rng, spec: SynthSpec):
    n = max(2, int(round(spec.duration / spec.period)))
    b0 = spec.burst_start
    if b0 is None:
        b0 = spec.duration / 2
    b1 = b0 + spec.burst_duration
    n_in = int(round(n * spec.burst_fraction))
    n_out = n - n_in
    inside = _uniform_times(rng, n_in, b0, b1)
    before_len, after_len = b0, spec.duration - b1
    n_before = int(round(n_out * before_len / (before_len + after_len)))
    before = _uniform_times(rng, n_before, 0.0, b0) if n_before else np.empty(0)
    after = _uniform_times(rng, n_out - n_before, b1, spec.duration) if n_out - n_before else np.empty(0)
    return np.concatenate([before, inside, after])


def _walk(rng, times, speed, turn_sigma, x0, y0, heading):
    """Correlated random walk; heading diffuses with time."""
    n = len(times)
    sogs = speed * rng.uniform(0.8, 1.2, n)
    dt = np.diff(times, append=times[-1])
    turns = rng.normal(0.0, turn_sigma, n) * np.sqrt(dt / 60.0)
    headings = heading + np.concatenate([[0.0], np.cumsum(turns[:-1])])
    xs = x0 + np.concatenate([[0.0], np.cumsum(np.cos(headings) * sogs * dt)[:-1]])
    ys = y0 + np.concatenate([[0.0], np.cumsum(np.sin(headings) * sogs * dt)[:-1]])
    return xs, ys, sogs, np.mod(headings, TWO_PI)


def _square(times, speed, leg, period, x0, y0, up):
    """East-going square wave: ``leg`` steps east, ``leg`` steps north/south."""
    n = len(times)
    xs, ys, sogs, cogs = np.empty(n), np.empty(n), np.empty(n), np.empty(n)
    x, y = x0, y0
    for i in range(n):
        phase = (i // leg) % 4
        heading = (0.0, math.pi / 2 if up else 3 * math.pi / 2, 0.0,
                   3 * math.pi / 2 if up else math.pi / 2)[phase]
        xs[i], ys[i], sogs[i], cogs[i] = x, y, speed, heading
        dt = times[i + 1] - times[i] if i + 1 < n else 0.0
        x += math.cos(heading) * speed * dt
        y += math.sin(heading) * speed * dt
    return xs, ys, sogs, cogs


def synth(seed: int, spec: Optional[SynthSpec] = None, **overrides) -> Dict[int, Trajectory]:
    """Reproducible synthetic trajectories (ids ``0..n-1``, times from 0)."""
    if spec is None:
        spec = SynthSpec(**overrides)
    elif overrides:
        spec = SynthSpec(**{**spec.__dict__, **overrides})
    rng = np.random.default_rng(seed)
    out = {}
    for tid in range(spec.n_trajectories):
        model = spec.model
        if model == "mixed":
            model = "random-walk" if tid % 2 == 0 else "square-wave"
        if model == "burst":
            times = _burst_times(rng, spec)
        else:
            n = max(2, int(spec.duration // spec.period))
            times = (np.arange(n) + rng.uniform(0.5, 1.0)) * spec.period
            if spec.jitter:
                times = times + rng.uniform(-spec.jitter, spec.jitter, n) * spec.period
        x0, y0 = rng.uniform(-5000.0, 5000.0, size=2)
        heading = rng.uniform(0.0, TWO_PI)
        speed = spec.speed * rng.uniform(0.5, 1.5)
        if model == "constant-velocity":
            vx, vy = speed * math.cos(heading), speed * math.sin(heading)
            xs, ys = x0 + vx * times, y0 + vy * times
            sogs = np.full(len(times), speed)
            cogs = np.full(len(times), heading % TWO_PI)
        elif model == "square-wave":
            xs, ys, sogs, cogs = _square(times, speed, spec.leg, spec.period, x0, y0,
                                         bool(rng.integers(2)))
        else:
            xs, ys, sogs, cogs = _walk(rng, times, speed, spec.turn_sigma, x0, y0, heading)
        pts = [Point(tid, float(t), float(x), float(y), float(s), float(c))
               for t, x, y, s, c in zip(times, xs, ys, sogs, cogs)]
        out[tid] = Trajectory(tid, pts)
    return out


def burst_dataset(seed: int, n_trajectories: int = 50, points_per_trajectory: int = 200,
                  duration: float = 9000.0, burst_start: float = 4050.0) -> Dict[int, Trajectory]:
    """Bursty stream: most points of every trajectory fall in one 5-minute band."""
    return synth(seed, SynthSpec(n_trajectories=n_trajectories, duration=duration,
                                 period=duration / points_per_trajectory, model="burst",
                                 burst_start=burst_start))


def mixed_dataset(seed: int, n_trajectories: int = 20, duration: float = 3600.0,
                  period: float = 10.0) -> Dict[int, Trajectory]:
    """Half random-walk, half square-wave trajectories on a regular clock."""
    return synth(seed, SynthSpec(n_trajectories=n_trajectories, duration=duration,
                                 period=period, model="mixed"))
