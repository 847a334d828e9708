"""Monitoring records: CSV ingest, quality flags, z-score scaling and windowing."""

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import IntEnum
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DegenerateChannelError,
    InsufficientDataError,
    OrderingError,
    SchemaError,
)
from .utils import atomic_write_text, format_float

SPLIT_FRACTIONS = (0.7, 0.1, 0.2)


class Flag(IntEnum):
    OBSERVED = 0
    MISSING = 1
    ABNORMAL = 2
    IMPUTED = 3


FLAG_CODES = {Flag.OBSERVED: "o", Flag.MISSING: "m", Flag.ABNORMAL: "a", Flag.IMPUTED: "i"}
_CODE_FLAGS = {v: k for k, v in FLAG_CODES.items()}


@dataclass(frozen=True)
class MonitoringFrame:
    """One timestamped row of the record."""

    timestamp: int
    values: Mapping[str, Optional[float]]
    flags: Mapping[str, Flag]


class MonitoringSeries:
    """Immutable columnar store of monitoring frames.

    ``values`` holds NaN exactly where the flag is ``MISSING``; ``frames()``
    yields the row view.
    """

    def __init__(self, timestamps, channels, values, flags=None):
        ts = np.asarray(timestamps, dtype=np.int64).copy()
        channels = tuple(str(c) for c in channels)
        vals = np.array(values, dtype=np.float64, copy=True).reshape(len(ts), len(channels))
        if flags is None:
            fl = np.where(np.isnan(vals), Flag.MISSING, Flag.OBSERVED).astype(np.int8)
        else:
            fl = np.array(flags, dtype=np.int8, copy=True).reshape(vals.shape)
        if len(set(channels)) != len(channels):
            raise SchemaError(f"duplicate channel ids in {channels}")
        if len(ts) > 1 and np.any(np.diff(ts) <= 0):
            bad = int(np.argmax(np.diff(ts) <= 0)) + 1
            raise OrderingError(f"timestamps not strictly increasing at row {bad}")
        missing = fl == Flag.MISSING
        vals[missing] = np.nan
        if not np.all(np.isfinite(vals[~missing])):
            raise DataError("non-missing cells must carry finite values")
        for arr in (ts, vals, fl):
            arr.setflags(write=False)
        self.timestamps = ts
        self.channels = channels
        self.values = vals
        self.flags = fl

    def __len__(self):
        return len(self.timestamps)

    def __eq__(self, other):
        if not isinstance(other, MonitoringSeries):
            return NotImplemented
        return (
            self.channels == other.channels
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.flags, other.flags)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    def __repr__(self):
        return f"MonitoringSeries(n={len(self)}, channels={list(self.channels)})"

    def index(self, channel):
        try:
            return self.channels.index(channel)
        except ValueError:
            raise SchemaError(f"unknown channel {channel!r}; have {list(self.channels)}") from None

    def column(self, channel):
        return self.values[:, self.index(channel)]

    def flag_column(self, channel):
        return self.flags[:, self.index(channel)]

    def frame(self, i):
        vals = {}
        flags = {}
        for j, ch in enumerate(self.channels):
            f = Flag(int(self.flags[i, j]))
            flags[ch] = f
            vals[ch] = None if f == Flag.MISSING else float(self.values[i, j])
        return MonitoringFrame(int(self.timestamps[i]), vals, flags)

    def frames(self):
        return [self.frame(i) for i in range(len(self))]

    @classmethod
    def from_frames(cls, frames: Sequence[MonitoringFrame]):
        if not frames:
            raise InsufficientDataError("no frames")
        channels = tuple(frames[0].values)
        vals = np.full((len(frames), len(channels)), np.nan)
        flags = np.zeros_like(vals, dtype=np.int8)
        for i, fr in enumerate(frames):
            if tuple(fr.values) != channels:
                raise SchemaError(f"frame {i} channel list differs from frame 0")
            for j, ch in enumerate(channels):
                flags[i, j] = fr.flags[ch]
                if fr.values[ch] is not None:
                    vals[i, j] = fr.values[ch]
        return cls([fr.timestamp for fr in frames], channels, vals, flags)

    def replace(self, values=None, flags=None):
        return MonitoringSeries(
            self.timestamps,
            self.channels,
            self.values if values is None else values,
            self.flags if flags is None else flags,
        )

    def select(self, channels):
        idx = [self.index(c) for c in channels]
        return MonitoringSeries(self.timestamps, channels, self.values[:, idx], self.flags[:, idx])

    def slice(self, start, stop):
        return MonitoringSeries(
            self.timestamps[start:stop],
            self.channels,
            self.values[start:stop],
            self.flags[start:stop],
        )


def _parse_timestamp(text, row):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise DataError(f"row {row}: unparseable timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _parse_value(text):
    text = text.strip()
    if not text:
        return math.nan
    try:
        v = float(text)
    except ValueError:
        return math.nan
    return v if math.isfinite(v) else math.nan


def ingest_csv(path, schema=None):
    """Read a monitoring CSV into a :class:`MonitoringSeries`.

    Empty or unparseable numeric cells become ``MISSING``. When ``schema``
    is given the header must list exactly those channels, in order.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if not header or header[0] != "timestamp":
            raise SchemaError(f"{path}: first column must be 'timestamp', got {header[:1]}")
        channels = header[1:]
        if schema is not None and list(schema) != channels:
            raise SchemaError(f"{path}: header {channels} does not match schema {list(schema)}")
        timestamps = []
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if len(rec) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} cells, got {len(rec)}")
            timestamps.append(_parse_timestamp(rec[0], lineno))
            rows.append([_parse_value(c) for c in rec[1:]])
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(channels))
    return MonitoringSeries(timestamps, channels, values)


def format_csv(series):
    lines = [",".join(("timestamp",) + series.channels)]
    for i in range(len(series)):
        cells = [str(int(series.timestamps[i]))]
        for j in range(len(series.channels)):
            if series.flags[i, j] == Flag.MISSING:
                cells.append("")
            else:
                cells.append(format_float(series.values[i, j]))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_csv(series, path):
    return atomic_write_text(path, format_csv(series))


def write_flags_csv(series, path):
    lines = [",".join(("timestamp",) + series.channels)]
    for i in range(len(series)):
        codes = [FLAG_CODES[Flag(int(f))] for f in series.flags[i]]
        lines.append(",".join([str(int(series.timestamps[i]))] + codes))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def read_flags_csv(series, path):
    """Overlay quality flags written by :func:`write_flags_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header[1:]) != series.channels:
            raise SchemaError(f"{path}: flag header does not match series channels")
        flags = np.array([[_CODE_FLAGS[c] for c in rec[1:]] for rec in reader if rec], dtype=np.int8)
    if flags.shape != series.flags.shape:
        raise SchemaError(f"{path}: flag table shape {flags.shape} != {series.flags.shape}")
    return series.replace(flags=flags)


def flag_abnormal(series, k=6.0, channels=None):
    """Re-flag observed values outside ``median +/- k * MAD`` as ``ABNORMAL``.

    Median and MAD are taken over every non-missing cell of the channel, so
    a second pass sees the same statistics and flags nothing new. With
    MAD = 0 any value differing from the median is flagged. Channels with
    fewer than three values pass through untouched.
    """
    if k <= 0:
        raise ConfigError(f"k must be positive, got {k}")
    channels = series.channels if channels is None else tuple(channels)
    flags = series.flags.copy()
    for ch in channels:
        j = series.index(ch)
        present = flags[:, j] != Flag.MISSING
        if not present.any():
            raise DegenerateChannelError(f"channel {ch!r} is entirely missing")
        x = series.values[present, j]
        if len(x) < 3:
            continue
        med = np.median(x)
        mad = np.median(np.abs(x - med))
        dev = np.abs(series.values[:, j] - med)
        outside = present & (dev > k * mad)
        flags[outside & (flags[:, j] == Flag.OBSERVED), j] = Flag.ABNORMAL
    return series.replace(flags=flags)


@dataclass(frozen=True)
class NormalizationStats:
    channels: tuple
    mean: tuple
    std: tuple

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "mean", tuple(float(m) for m in self.mean))
        object.__setattr__(self, "std", tuple(float(s) for s in self.std))
        if not (len(self.channels) == len(self.mean) == len(self.std)):
            raise SchemaError("stats fields have inconsistent lengths")
        for ch, s in zip(self.channels, self.std):
            if not s > 0:
                raise DegenerateChannelError(f"channel {ch!r} has non-positive std {s}")

    def _idx(self, channel):
        try:
            return self.channels.index(channel)
        except ValueError:
            raise SchemaError(f"no stats for channel {channel!r}") from None

    def normalize(self, x, channel):
        i = self._idx(channel)
        return (np.asarray(x, dtype=np.float64) - self.mean[i]) / self.std[i]

    def denormalize(self, z, channel):
        i = self._idx(channel)
        return np.asarray(z, dtype=np.float64) * self.std[i] + self.mean[i]

    def to_dict(self):
        return {"channels": list(self.channels), "mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["channels"]), tuple(d["mean"]), tuple(d["std"]))


def zscore_fit(series, train_range=None, channels=None):
    """Per-channel mean and population std over ``train_range`` (start, stop)."""
    start, stop = (0, len(series)) if train_range is None else train_range
    if stop <= start:
        raise InsufficientDataError("empty training range")
    channels = series.channels if channels is None else tuple(channels)
    means, stds = [], []
    for ch in channels:
        j = series.index(ch)
        x = series.values[start:stop, j]
        x = x[series.flags[start:stop, j] != Flag.MISSING]
        if len(x) == 0:
            raise DegenerateChannelError(f"channel {ch!r} has no values in the training range")
        mu = x.mean()
        sd = np.sqrt(np.mean((x - mu) ** 2))
        if not sd > 0:
            raise DegenerateChannelError(f"channel {ch!r} is constant on the training range")
        means.append(mu)
        stds.append(sd)
    return NormalizationStats(channels, means, stds)


def _check_stats(series, stats):
    if not set(stats.channels) <= set(series.channels):
        raise SchemaError(f"stats channels {stats.channels} not in series {series.channels}")


def zscore_apply(series, stats):
    _check_stats(series, stats)
    vals = series.values.copy()
    for ch in stats.channels:
        j = series.index(ch)
        vals[:, j] = stats.normalize(vals[:, j], ch)
    return series.replace(values=vals)


def zscore_invert(series, stats):
    _check_stats(series, stats)
    vals = series.values.copy()
    for ch in stats.channels:
        j = series.index(ch)
        vals[:, j] = stats.denormalize(vals[:, j], ch)
    return series.replace(values=vals)


def split_counts(n, fractions=SPLIT_FRACTIONS):
    """Chronological (train, validation, test) sizes; rounding remainder goes to test."""
    n_train = int(round(n * fractions[0]))
    n_val = int(round(n * fractions[1]))
    n_val = min(n_val, n - n_train)
    return n_train, n_val, n - n_train - n_val


def split_ranges(n, fractions=SPLIT_FRACTIONS):
    a, b, _ = split_counts(n, fractions)
    return {"train": (0, a), "validation": (a, a + b), "test": (a + b, n)}


@dataclass
class ForecastDataset:
    """Windowed one-step-ahead pairs for a single channel."""

    window_length: int
    channel: str
    inputs: np.ndarray
    targets: np.ndarray
    starts: np.ndarray
    split: dict
    stats: Optional[NormalizationStats] = None
    source_digest: Optional[str] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.targets)

    def part(self, name):
        a, b = self.split[name]
        return self.inputs[a:b], self.targets[a:b]

    @property
    def train(self):
        return self.part("train")

    @property
    def validation(self):
        return self.part("validation")

    @property
    def test(self):
        return self.part("test")

    def target_positions(self, name=None):
        pos = self.starts + self.window_length
        if name is None:
            return pos
        a, b = self.split[name]
        return pos[a:b]

    def manifest(self):
        return {
            "window_length": self.window_length,
            "channel": self.channel,
            "n_windows": len(self),
            "split": {k: list(v) for k, v in self.split.items()},
            "normalization": None if self.stats is None else self.stats.to_dict(),
            "source_digest": self.source_digest,
            **self.meta,
        }


def make_windows(series, L, channel, fractions=SPLIT_FRACTIONS, values=None):
    """Slide a length-``L`` window over ``channel``; the next value is the target.

    Windows touching a missing or abnormal cell (input or target) are
    skipped. ``values`` substitutes the numeric column (e.g. a denoised
    copy) while keeping the series' flags.
    """
    if L < 1:
        raise DataError(f"window length must be positive, got {L}")
    j = series.index(channel)
    x = series.values[:, j] if values is None else np.asarray(values, dtype=np.float64)
    if len(x) != len(series):
        raise SchemaError("substituted values do not match series length")
    clean = np.isin(series.flags[:, j], (Flag.OBSERVED, Flag.IMPUTED))
    n = len(series)
    if clean.sum() < L + 1:
        raise InsufficientDataError(f"need at least {L + 1} clean frames in {channel!r}, have {clean.sum()}")
    # windows covering L+1 clean cells
    bad = np.concatenate([[0], np.cumsum(~clean)])
    starts = np.arange(n - L)
    ok = bad[starts + L + 1] - bad[starts] == 0
    starts = starts[ok]
    idx = starts[:, None] + np.arange(L)[None, :]
    inputs = x[idx]
    targets = x[starts + L]
    return ForecastDataset(
        window_length=L,
        channel=channel,
        inputs=inputs,
        targets=targets,
        starts=starts,
        split=split_ranges(len(starts), fractions),
    )
