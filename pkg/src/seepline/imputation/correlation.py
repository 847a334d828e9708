"""Pearson correlation and greedy redundancy screening."""

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..data import Flag
from ..errors import DegenerateVarianceError, SchemaError
from ..utils import atomic_write_text, format_float


def pearson(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise SchemaError(f"series shapes differ: {a.shape} vs {b.shape}")
    if len(a) < 2:
        raise SchemaError("pearson needs at least two points")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DegenerateVarianceError("pearson is undefined for a constant series")
    # centred form of the raw-sum formula; same value, no cancellation
    da = a - a.mean()
    db = b - b.mean()
    r = np.dot(da, db) / np.sqrt(np.dot(da, da) * np.dot(db, db))
    return float(np.clip(r, -1.0, 1.0))


@dataclass(frozen=True)
class CorrelationMatrix:
    channels: tuple
    coefficients: np.ndarray

    def __getitem__(self, pair):
        i = self.channels.index(pair[0])
        j = self.channels.index(pair[1])
        return float(self.coefficients[i, j])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + list(self.channels))
        for ch, row in zip(self.channels, self.coefficients):
            w.writerow([ch] + [format_float(v) for v in row])
        return buf.getvalue()

    def write_csv(self, path):
        return atomic_write_text(path, self.to_csv())

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        channels = tuple(rows[0][1:])
        if [r[0] for r in rows[1:]] != list(channels):
            raise SchemaError("correlation CSV row labels do not match column labels")
        coef = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        return cls(channels, coef)


def correlation_matrix(series, channels=None):
    """Pairwise Pearson matrix over rows where both channels are present."""
    channels = series.channels if channels is None else tuple(channels)
    cols = [series.column(c) for c in channels]
    present = [series.flag_column(c) != Flag.MISSING for c in channels]
    k = len(channels)
    coef = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            both = present[i] & present[j]
            coef[i, j] = coef[j, i] = pearson(cols[i][both], cols[j][both])
    return CorrelationMatrix(channels, coef)


def correlation_screen(series, threshold=0.8, channels=None):
    """Keep channels in order, dropping any whose |P| with a kept one exceeds ``threshold``."""
    mat = correlation_matrix(series, channels)
    if len(mat.channels) < 2:
        raise SchemaError("correlation screening needs at least two channels")
    kept = []
    for j, ch in enumerate(mat.channels):
        if all(abs(mat.coefficients[i, j]) <= threshold for i in kept):
            kept.append(j)
    return [mat.channels[j] for j in kept], mat
