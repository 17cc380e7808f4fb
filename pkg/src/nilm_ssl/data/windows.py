"""Standardization and stride-1 seq2point window datasets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyDatasetError, NormalizationError, UsageError
from .series import AGGREGATE, AlignedHousehold, PowerSeries

MIDPOINT = "midpoint"
ENDPOINT = "endpoint"


@dataclass(frozen=True)
class NormStats:
    mean: float
    std: float
    role: str = AGGREGATE

    def __post_init__(self):
        if not self.std > 0:
            raise NormalizationError(f"{self.role}: std must be positive, got {self.std}")

    def to_dict(self):
        return {"mean": self.mean, "std": self.std, "role": self.role}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["mean"]), float(d["std"]), d.get("role", AGGREGATE))


def fit_norm(series, role: str = AGGREGATE, mask=None) -> NormStats:
    """Mean and population std over valid samples."""
    if isinstance(series, PowerSeries):
        values = series.values[series.valid if mask is None else mask]
    else:
        values = np.asarray(series, dtype=np.float64)
        if mask is not None:
            values = values[mask]
    if values.size < 2:
        raise NormalizationError(f"{role}: need at least 2 valid samples, got {values.size}")
    std = float(values.std())
    if not std > 0:
        raise NormalizationError(f"{role}: zero variance")
    return NormStats(float(values.mean()), std, role)


def fit_norm_many(households, channel: str, role: str = None) -> NormStats:
    """Pooled statistics of ``channel`` over several households."""
    chunks = [h.channel(channel).values[h.usable(channel)] for h in households]
    return fit_norm(np.concatenate(chunks) if chunks else np.zeros(0), role or channel)


def normalize(x, stats: NormStats):
    return (np.asarray(x, dtype=np.float64) - stats.mean) / stats.std


def denormalize(x, stats: NormStats):
    return np.asarray(x, dtype=np.float64) * stats.std + stats.mean


def target_offset(window: int, mode: str) -> int:
    if mode == MIDPOINT:
        if window % 2 == 0:
            raise UsageError(f"midpoint mode needs an odd window, got {window}")
        return (window - 1) // 2
    if mode == ENDPOINT:
        return window - 1
    raise UsageError(f"unknown target mode {mode!r}")


def valid_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal ``[start, stop)`` runs of True in ``mask``."""
    m = np.concatenate([[False], np.asarray(mask, dtype=bool), [False]])
    edges = np.flatnonzero(m[1:] != m[:-1])
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


@dataclass
class WindowBatch:
    inputs: np.ndarray       # [N, W] normalized aggregate
    targets: np.ndarray      # [N] normalized target at the mode's position
    mode: str
    offsets: np.ndarray      # [N] window start index in the source grid
    window: int

    def __len__(self):
        return len(self.targets)

    def subset(self, idx) -> "WindowBatch":
        return WindowBatch(self.inputs[idx], self.targets[idx], self.mode, self.offsets[idx], self.window)


def concat_batches(batches: list) -> WindowBatch:
    if not batches:
        raise EmptyDatasetError("no window batches to concatenate")
    first = batches[0]
    if any(b.window != first.window or b.mode != first.mode for b in batches):
        raise UsageError("cannot concatenate batches with different window or mode")
    return WindowBatch(
        np.concatenate([b.inputs for b in batches]),
        np.concatenate([b.targets for b in batches]),
        first.mode,
        np.concatenate([b.offsets for b in batches]),
        first.window,
    )


def make_windows(
    household: AlignedHousehold,
    target: str,
    window: int,
    mode: str,
    input_stats: NormStats,
    target_stats: NormStats,
) -> WindowBatch:
    """All stride-1 windows lying inside contiguous usable runs.

    ``target="aggregate"`` gives the self-supervised pretext pairs.
    """
    if window < 1:
        raise UsageError("window must be >= 1")
    off = target_offset(window, mode)
    agg = normalize(household.aggregate.values, input_stats)
    tgt = normalize(household.channel(target).values, target_stats)
    usable = household.usable(target)
    starts = []
    for a, b in valid_runs(usable):
        if b - a >= window:
            starts.append(np.arange(a, b - window + 1))
    if not starts:
        raise EmptyDatasetError(
            f"{household.name or 'household'}: no usable run of length >= {window} for {target!r}"
        )
    offsets = np.concatenate(starts)
    view = np.lib.stride_tricks.sliding_window_view(agg, window)
    return WindowBatch(view[offsets].copy(), tgt[offsets + off], mode, offsets, window)


def split_chronological(batch: WindowBatch, fraction: float = 0.1):
    """Split off the last ``fraction`` of windows (by offset) for validation."""
    if not 0.0 < fraction < 1.0:
        raise UsageError("validation fraction must be in (0, 1)")
    n = len(batch)
    n_val = max(1, int(round(n * fraction)))
    if n_val >= n:
        raise EmptyDatasetError(f"only {n} window(s); cannot hold out a validation split")
    order = np.argsort(batch.offsets, kind="stable")
    return batch.subset(order[: n - n_val]), batch.subset(order[n - n_val:])
