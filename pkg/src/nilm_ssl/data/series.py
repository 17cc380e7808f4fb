"""Meter-file ingestion, 1-minute resampling and channel alignment."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import AlignmentError, IngestionError

log = logging.getLogger(__name__)

PERIOD = 60
AGGREGATE = "aggregate"
REFIT_CSV = "refit_csv"
CHANNEL_DAT = "channel_dat"
CANONICAL = "canonical"


@dataclass
class PowerSeries:
    """Uniformly sampled power in watts with a per-sample validity mask."""

    start: int
    period: int
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.shape != self.valid.shape or self.values.ndim != 1:
            raise ValueError("values and valid must be 1-D arrays of equal length")

    def __len__(self):
        return len(self.values)

    @property
    def end(self) -> int:
        """Exclusive end timestamp."""
        return self.start + self.period * len(self.values)

    @property
    def timestamps(self) -> np.ndarray:
        return self.start + self.period * np.arange(len(self.values), dtype=np.int64)

    def crop(self, start: int, end: int) -> "PowerSeries":
        i0 = (start - self.start) // self.period
        i1 = (end - self.start) // self.period
        return PowerSeries(start, self.period, self.values[i0:i1].copy(), self.valid[i0:i1].copy())

    def shifted(self, minutes: int) -> "PowerSeries":
        return PowerSeries(self.start + minutes * self.period, self.period, self.values, self.valid)


@dataclass
class AlignedHousehold:
    """Aggregate plus appliance channels on one grid with a shared mask."""

    aggregate: PowerSeries
    appliances: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        a = self.aggregate
        for app, s in self.appliances.items():
            if (s.start, s.period, len(s)) != (a.start, a.period, len(a)):
                raise AlignmentError(f"channel {app!r} is not on the aggregate grid")

    def __len__(self):
        return len(self.aggregate)

    @property
    def start(self):
        return self.aggregate.start

    @property
    def period(self):
        return self.aggregate.period

    def channel(self, name: str) -> PowerSeries:
        if name == AGGREGATE:
            return self.aggregate
        try:
            return self.appliances[name]
        except KeyError:
            raise KeyError(f"household {self.name!r} has no channel {name!r}") from None

    def usable(self, target: str = AGGREGATE) -> np.ndarray:
        return self.aggregate.valid & self.channel(target).valid

    @property
    def valid(self) -> np.ndarray:
        mask = self.aggregate.valid.copy()
        for s in self.appliances.values():
            mask &= s.valid
        return mask


@dataclass
class MeterReadings:
    """Raw timestamped readings, one array per channel, sorted by time."""

    timestamps: np.ndarray
    channels: dict
    malformed: int = 0

    def __len__(self):
        return len(self.timestamps)


def _finalize(ts: list, cols: dict, malformed: int) -> MeterReadings:
    ts = np.asarray(ts, dtype=np.float64)
    order = np.argsort(ts, kind="stable")
    ts = ts[order]
    # among equal timestamps keep the last one in file order
    keep = np.ones(len(ts), dtype=bool)
    if len(ts) > 1:
        keep[:-1] = ts[1:] != ts[:-1]
    channels = {k: np.asarray(v, dtype=np.float64)[order][keep] for k, v in cols.items()}
    return MeterReadings(ts[keep], channels, malformed)


def _parse_channel_dat(path: Path, channel: str) -> MeterReadings:
    ts, vals, malformed = [], [], 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                if len(parts) != 2:
                    raise ValueError
                t, v = float(parts[0]), float(parts[1])
                if not (math.isfinite(t) and math.isfinite(v)):
                    raise ValueError
            except ValueError:
                malformed += 1
                log.debug("%s:%d: malformed line %r", path, lineno, line.rstrip())
                continue
            ts.append(t)
            vals.append(v)
    return _finalize(ts, {channel: vals}, malformed)


def _parse_refit_csv(path: Path) -> MeterReadings:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return _finalize([], {}, 0)
        header = [h.strip() for h in header]
        expected_tail = [f"Appliance{i}" for i in range(1, len(header) - 2)]
        if header[:3] != ["Time", "Unix", "Aggregate"] or header[3:] != expected_tail:
            raise IngestionError(f"unknown REFIT header {header!r}", line=1)
        names = header[2:]
        ts = []
        cols = {n: [] for n in names}
        malformed = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != len(header):
                    raise ValueError
                t = float(row[1])
                vals = [float(x) for x in row[2:]]
                if not all(math.isfinite(v) for v in vals) or not math.isfinite(t):
                    raise ValueError
            except ValueError:
                malformed += 1
                log.debug("%s:%d: malformed row", path, lineno)
                continue
            ts.append(t)
            for n, v in zip(names, vals):
                cols[n].append(v)
    return _finalize(ts, cols, malformed)


def parse_meter_file(path, fmt: str, channel: str = "power") -> MeterReadings:
    """Read a REFIT-style CSV or a ``unix_seconds watts`` channel file.

    REFIT channels are named ``Aggregate``, ``Appliance1`` ... as in the
    header; a channel file yields one channel called ``channel``.
    """
    path = Path(path)
    try:
        if fmt == CHANNEL_DAT:
            readings = _parse_channel_dat(path, channel)
        elif fmt == REFIT_CSV:
            readings = _parse_refit_csv(path)
        else:
            raise IngestionError(f"unknown meter format {fmt!r}")
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise IngestionError(f"{path} is not UTF-8 text: {exc}") from exc
    if len(readings) == 0:
        log.warning("%s: no readings", path)
    if readings.malformed:
        log.warning("%s: skipped %d malformed line(s)", path, readings.malformed)
    return readings


def resample_1min(timestamps, values, start: Optional[int] = None, end: Optional[int] = None) -> PowerSeries:
    """Average readings into 60 s buckets ``[minute, minute + 60)``.

    Empty buckets are invalid; negative readings are clamped to zero first.
    ``start``/``end`` (unix seconds, minute-aligned) fix the grid explicitly.
    """
    ts = np.asarray(timestamps, dtype=np.float64)
    vals = np.asarray(values, dtype=np.float64)
    negative = int(np.count_nonzero(vals < 0))
    if negative:
        log.warning("clamped %d negative reading(s) to 0 W", negative)
        vals = np.maximum(vals, 0.0)
    if len(ts) == 0 and (start is None or end is None):
        return PowerSeries(0 if start is None else start, PERIOD, np.zeros(0), np.zeros(0, dtype=bool))
    minute = np.floor(ts / PERIOD).astype(np.int64) * PERIOD
    if len(minute) > 1 and np.any(np.diff(minute) < 0):
        order = np.argsort(ts, kind="stable")
        minute, vals = minute[order], vals[order]
    g0 = int(minute[0]) if start is None else int(start)
    g1 = int(minute[-1]) + PERIOD if end is None else int(end)
    n = max(0, (g1 - g0) // PERIOD)
    sel = (minute >= g0) & (minute < g1)
    idx = (minute[sel] - g0) // PERIOD
    vals = vals[sel]
    out = np.zeros(n)
    valid = np.zeros(n, dtype=bool)
    if len(idx):
        # minutes are contiguous groups; mean = min + mean(excess) keeps a
        # constant minute exactly constant
        first = np.flatnonzero(np.r_[True, idx[1:] != idx[:-1]])
        counts = np.diff(np.r_[first, len(idx)])
        lo = np.minimum.reduceat(vals, first)
        excess = np.add.reduceat(vals - np.repeat(lo, counts), first)
        out[idx[first]] = lo + excess / counts
        valid[idx[first]] = True
    return PowerSeries(g0, PERIOD, out, valid)


def align(aggregate: PowerSeries, appliances: dict, name: str = "") -> AlignedHousehold:
    """Crop all channels to their common span; validity becomes the conjunction."""
    series = [aggregate, *appliances.values()]
    if any(s.period != aggregate.period for s in series):
        raise AlignmentError("channels have different sampling periods")
    if any((s.start - aggregate.start) % aggregate.period for s in series):
        raise AlignmentError("channels are not on a common grid")
    start = max(s.start for s in series)
    end = min(s.end for s in series)
    if end <= start:
        raise AlignmentError("channels have no overlapping time span")
    agg = aggregate.crop(start, end)
    apps = {k: s.crop(start, end) for k, s in appliances.items()}
    mask = agg.valid.copy()
    for s in apps.values():
        mask &= s.valid
    agg.valid = mask
    for s in apps.values():
        s.valid = mask.copy()
    return AlignedHousehold(agg, apps, name)


# --------------------------------------------------------------------------
# canonical aligned CSV
# --------------------------------------------------------------------------


def write_canonical_csv(household: AlignedHousehold, path) -> Path:
    """``timestamp,aggregate,<appliance...>,valid`` with unix-second timestamps.

    Values are written with ``repr`` so a read-back is bit-exact; invalid
    samples keep their (meaningless) stored value and ``valid=0``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(household.appliances)
    cols = [household.aggregate.values] + [household.appliances[n].values for n in names]
    valid = household.valid
    ts = household.aggregate.timestamps
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["timestamp", AGGREGATE, *names, "valid"]) + "\n")
        for i in range(len(ts)):
            row = [str(int(ts[i]))] + [repr(float(c[i])) for c in cols] + ["1" if valid[i] else "0"]
            fh.write(",".join(row) + "\n")
    return path


def read_canonical_csv(path, channels: Optional[list] = None, name: str = "") -> AlignedHousehold:
    """Load a canonical CSV; ``channels`` restricts which appliances are exposed."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[:2] != ["timestamp", AGGREGATE] or header[-1] != "valid":
                raise IngestionError(f"{path}: not a canonical household CSV", line=1)
            rows = list(reader)
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    apps = header[2:-1]
    wanted = apps if channels is None else [c for c in channels if c != AGGREGATE]
    missing = [c for c in wanted if c not in apps]
    if missing:
        raise IngestionError(f"{path}: no channel(s) {missing}")
    try:
        data = np.array([[float(x) for x in r] for r in rows], dtype=np.float64).reshape(len(rows), len(header))
    except ValueError as exc:
        raise IngestionError(f"{path}: malformed numeric field ({exc})") from exc
    ts = data[:, 0].astype(np.int64)
    if len(ts) > 1 and np.any(np.diff(ts) != PERIOD):
        raise IngestionError(f"{path}: timestamps are not on a contiguous 60 s grid")
    start = int(ts[0]) if len(ts) else 0
    valid = data[:, -1] != 0
    agg = PowerSeries(start, PERIOD, data[:, 1], valid.copy())
    series = {c: PowerSeries(start, PERIOD, data[:, 2 + apps.index(c)], valid.copy()) for c in wanted}
    return AlignedHousehold(agg, series, name or path.stem)


def load_refit_household(path, channel_map: dict, name: str = "", start=None, end=None) -> AlignedHousehold:
    """Ingest a REFIT CSV; ``channel_map`` maps appliance name -> ``ApplianceK``."""
    raw = parse_meter_file(path, REFIT_CSV)
    if len(raw) == 0:
        raise IngestionError(f"{path}: no readings")
    agg = resample_1min(raw.timestamps, raw.channels["Aggregate"], start, end)
    apps = {}
    for app, col in channel_map.items():
        if col not in raw.channels:
            raise IngestionError(f"{path}: no column {col!r}")
        apps[app] = resample_1min(raw.timestamps, raw.channels[col], agg.start, agg.end)
    return align(agg, apps, name or Path(path).stem)


def load_channel_household(aggregate_path, channel_paths: dict, name: str = "", start=None, end=None) -> AlignedHousehold:
    """Ingest one ``unix watts`` file per channel (UK-DALE/REDD style)."""
    raw = parse_meter_file(aggregate_path, CHANNEL_DAT)
    if len(raw) == 0:
        raise IngestionError(f"{aggregate_path}: no readings")
    agg = resample_1min(raw.timestamps, raw.channels["power"], start, end)
    apps = {}
    for app, p in channel_paths.items():
        r = parse_meter_file(p, CHANNEL_DAT)
        apps[app] = resample_1min(r.timestamps, r.channels["power"], agg.start, agg.end)
    return align(agg, apps, name or Path(aggregate_path).stem)
