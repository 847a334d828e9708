"""Orthonormal Daubechies filter banks.

Low-pass taps are stored in the classical order h[0..F-1] (sum sqrt(2));
the high-pass partner is the quadrature mirror g[k] = (-1)^k h[F-1-k].
Analysis correlates with these taps, synthesis convolves with them.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

_SQ2 = np.sqrt(2.0)
_SQ3 = np.sqrt(3.0)

_LOWPASS = {
    "haar": np.array([1.0, 1.0]) / _SQ2,
    "db1": np.array([1.0, 1.0]) / _SQ2,
    "db2": np.array([1 + _SQ3, 3 + _SQ3, 3 - _SQ3, 1 - _SQ3]) / (4 * _SQ2),
    "db4": np.array([
        0.2303778133088965,
        0.7148465705529157,
        0.6308807679298589,
        -0.0279837694168599,
        -0.1870348117190931,
        0.0308413818355607,
        0.0328830116668852,
        -0.0105974017850690,
    ]),
}

FAMILIES = ("haar", "db2", "db4")


@dataclass(frozen=True)
class FilterPair:
    name: str
    lowpass: np.ndarray
    highpass: np.ndarray

    @property
    def length(self):
        return len(self.lowpass)

    # orthonormal bank: reconstruction reuses the analysis taps
    @property
    def rec_lowpass(self):
        return self.lowpass

    @property
    def rec_highpass(self):
        return self.highpass


def quadrature_mirror(lowpass):
    F = len(lowpass)
    return np.array([(-1) ** k * lowpass[F - 1 - k] for k in range(F)])


def get_filters(name):
    key = name.lower()
    if key not in _LOWPASS:
        raise ConfigError(f"unknown wavelet {name!r}; choose from {FAMILIES}")
    h = _LOWPASS[key].copy()
    g = quadrature_mirror(h)
    h.setflags(write=False)
    g.setflags(write=False)
    return FilterPair(key, h, g)
