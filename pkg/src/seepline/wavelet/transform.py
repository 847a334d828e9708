"""Mallat filter-bank DWT: single step, multilevel cascade and inverse."""

import json
from dataclasses import dataclass
from typing import List

import numpy as np

from ..errors import ConfigError, InsufficientDataError, LevelError, ShapeError
from .filters import get_filters

BOUNDARIES = ("symmetric", "periodic")


def _as_filters(filters):
    return get_filters(filters) if isinstance(filters, str) else filters


def _check_boundary(boundary):
    if boundary not in BOUNDARIES:
        raise ConfigError(f"unknown boundary mode {boundary!r}; choose from {BOUNDARIES}")


def band_length(n, filter_length, boundary="symmetric"):
    if boundary == "periodic":
        return (n + 1) // 2
    return (n + filter_length - 1) // 2


def _symmetric_index(m, n):
    """Half-point symmetric extension: x[-1] = x[0], x[n] = x[n-1]."""
    m = np.asarray(m)
    period = 2 * n
    m = np.mod(m, period)
    return np.where(m < n, m, period - 1 - m)


def _analysis_indices(n, F, boundary):
    if boundary == "periodic":
        n_even = n + (n % 2)
        n_out = n_even // 2
        k = np.arange(n_out)[:, None]
        j = np.arange(F)[None, :]
        pos = np.mod(2 * k + 2 - F + j, n_even)
        # odd lengths are padded by repeating the last sample
        return np.minimum(pos, n - 1)
    n_out = band_length(n, F, boundary)
    k = np.arange(n_out)[:, None]
    j = np.arange(F)[None, :]
    return _symmetric_index(2 * k + 2 - F + j, n)


def dwt_step(x, filters, boundary="symmetric"):
    """One analysis level: filter with the low/high-pass pair, keep every second sample."""
    f = _as_filters(filters)
    _check_boundary(boundary)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("dwt_step expects a 1-D signal")
    if len(x) < f.length:
        raise InsufficientDataError(f"signal length {len(x)} shorter than filter length {f.length}")
    seg = x[_analysis_indices(len(x), f.length, boundary)]
    return seg @ f.lowpass, seg @ f.highpass


def idwt_step(approx, detail, filters, boundary="symmetric", length=None):
    """Inverse of :func:`dwt_step`; ``length`` trims the output."""
    f = _as_filters(filters)
    _check_boundary(boundary)
    a = np.asarray(approx, dtype=np.float64)
    d = np.asarray(detail, dtype=np.float64)
    if a.shape != d.shape:
        raise ShapeError(f"approximation/detail length mismatch: {a.shape} vs {d.shape}")
    F = f.length
    n = len(a)
    if boundary == "periodic":
        n_full = 2 * n
        out = np.zeros(n_full)
        k = np.arange(n)[:, None]
        j = np.arange(F)[None, :]
        pos = np.mod(2 * k + 2 - F + j, n_full)
        contrib = a[:, None] * f.rec_lowpass[None, :] + d[:, None] * f.rec_highpass[None, :]
        np.add.at(out, pos.ravel(), contrib.ravel())
    else:
        up_a = np.zeros(2 * n)
        up_d = np.zeros(2 * n)
        up_a[::2] = a
        up_d[::2] = d
        full = np.convolve(up_a, f.rec_lowpass) + np.convolve(up_d, f.rec_highpass)
        out = full[F - 2: 2 * n]
    if length is not None:
        if length > len(out):
            raise ShapeError(f"cannot reconstruct {length} samples from bands of length {n}")
        out = out[:length]
    return out


@dataclass
class WaveletDecomposition:
    """Bands of a level-n decomposition.

    ``details`` is ordered finest first: ``details[0]`` is oH_1 and
    ``details[-1]`` is oH_n, next to the approximation oL_n.
    """

    approximation: np.ndarray
    details: List[np.ndarray]
    original_length: int
    wavelet: str
    boundary: str = "symmetric"

    @property
    def level(self):
        return len(self.details)

    def bands(self):
        """[oL_n, oH_n, ..., oH_1]."""
        return [self.approximation] + self.details[::-1]

    def with_details(self, details):
        return WaveletDecomposition(
            self.approximation, [np.asarray(d) for d in details], self.original_length, self.wavelet, self.boundary
        )

    def to_dict(self):
        return {
            "wavelet": self.wavelet,
            "level": self.level,
            "boundary": self.boundary,
            "original_length": self.original_length,
            "approximation": self.approximation.tolist(),
            "details": [d.tolist() for d in self.details],
        }

    @classmethod
    def from_dict(cls, d):
        dec = cls(
            np.asarray(d["approximation"], dtype=np.float64),
            [np.asarray(b, dtype=np.float64) for b in d["details"]],
            int(d["original_length"]),
            d["wavelet"],
            d.get("boundary", "symmetric"),
        )
        if dec.level != int(d["level"]):
            raise ShapeError("stored level disagrees with number of detail bands")
        return dec

    def to_json(self):
        return json.dumps(self.to_dict())


def max_level(n, filters, boundary="symmetric"):
    """Deepest level whose every step input is at least one filter long."""
    f = _as_filters(filters)
    level = 0
    while n >= f.length:
        n = band_length(n, f.length, boundary)
        level += 1
    return level


def decompose(x, filters="db4", level=4, boundary="symmetric"):
    f = _as_filters(filters)
    _check_boundary(boundary)
    x = np.asarray(x, dtype=np.float64)
    if level < 1:
        raise LevelError(f"level must be >= 1, got {level}")
    deepest = max_level(len(x), f, boundary)
    if level > deepest:
        raise LevelError(
            f"level {level} too deep for length {len(x)} with {f.name} (max {deepest})"
        )
    details = []
    approx = x
    for _ in range(level):
        approx, d = dwt_step(approx, f, boundary)
        details.append(d)
    return WaveletDecomposition(approx, details, len(x), f.name, boundary)


def reconstruct(dec):
    f = get_filters(dec.wavelet)
    expected = dec.original_length
    lengths = [expected]
    for _ in range(dec.level):
        lengths.append(band_length(lengths[-1], f.length, dec.boundary))
    for i, d in enumerate(dec.details):
        if len(d) != lengths[i + 1]:
            raise ShapeError(f"detail band {i + 1} has length {len(d)}, expected {lengths[i + 1]}")
    if len(dec.approximation) != lengths[-1]:
        raise ShapeError("approximation band length inconsistent with original length")
    approx = dec.approximation
    for i in range(dec.level - 1, -1, -1):
        approx = idwt_step(approx, dec.details[i], f, dec.boundary, length=lengths[i])
    return approx
