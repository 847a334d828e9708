"""rigrsure threshold selection, coefficient shrinkage and the denoise stage."""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, InsufficientDataError
from .transform import decompose, reconstruct

MAD_TO_SIGMA = 0.6745
RISK_RULES = ("mirror", "sure")


@dataclass(frozen=True)
class RigrsureThreshold:
    """Threshold chosen for one band.

    ``risk[t-1]`` is Risk(t) for t = 1..N and ``t_min`` is 1-based, so the
    threshold is ``sigma * sqrt(g[t_min - 1])``.
    """

    threshold: float
    g: np.ndarray
    risk: np.ndarray
    t_min: int
    sigma: float
    rule: str = "mirror"


def risk_curve(g, rule="mirror"):
    """Risk(t) for t = 1..N over ascending squared coefficients ``g``.

    ``mirror`` pairs the count of retained coefficients (N - t) with
    g[N - t] (0-based), the reading of the published risk formula;
    ``sure`` pairs it with g[t - 1], Stein's unbiased risk for soft
    thresholding at sqrt(g[t - 1]).
    """
    g = np.asarray(g, dtype=np.float64)
    N = len(g)
    t = np.arange(1, N + 1)
    if rule == "mirror":
        tail = g[N - t]
    elif rule == "sure":
        tail = g[t - 1]
    else:
        raise ConfigError(f"unknown risk rule {rule!r}; choose from {RISK_RULES}")
    return (N - 2 * t + np.cumsum(g) + (N - t) * tail) / N


def rigrsure(band, sigma=1.0, rule="mirror"):
    band = np.asarray(band, dtype=np.float64).ravel()
    if band.size == 0:
        raise InsufficientDataError("rigrsure needs a non-empty band")
    if not sigma > 0:
        raise ConfigError(f"noise scale must be positive, got {sigma}")
    g = np.sort(np.abs(band / sigma)) ** 2
    risk = risk_curve(g, rule)
    # np.argmin returns the first minimum: ties go to the smallest t
    t_min = int(np.argmin(risk)) + 1
    return RigrsureThreshold(float(sigma * np.sqrt(g[t_min - 1])), g, risk, t_min, float(sigma), rule)


def shrink(band, gamma, mode="soft"):
    band = np.asarray(band, dtype=np.float64)
    if gamma < 0:
        raise ConfigError(f"threshold must be non-negative, got {gamma}")
    if mode == "soft":
        return np.sign(band) * np.maximum(np.abs(band) - gamma, 0.0)
    if mode == "hard":
        return np.where(np.abs(band) > gamma, band, 0.0)
    raise ConfigError(f"unknown shrinkage mode {mode!r}; use 'soft' or 'hard'")


def noise_sigma(finest_detail):
    return float(np.median(np.abs(finest_detail)) / MAD_TO_SIGMA)


def denoise_bands(dec, mode="soft", rule="mirror"):
    """Shrink every detail band of ``dec`` with its own rigrsure threshold.

    Returns the shrunk decomposition and the per-band thresholds (finest
    first). A zero noise estimate leaves the details untouched.
    """
    sigma = noise_sigma(dec.details[0])
    if sigma == 0.0:
        return dec, [None] * dec.level
    thresholds = [rigrsure(d, sigma, rule) for d in dec.details]
    shrunk = [shrink(d, th.threshold, mode) for d, th in zip(dec.details, thresholds)]
    return dec.with_details(shrunk), thresholds


def denoise(x, filters="db4", level=4, mode="soft", boundary="symmetric", rule="mirror"):
    """Decompose, threshold each detail band, reconstruct to the input length."""
    dec = decompose(x, filters, level, boundary)
    shrunk, _ = denoise_bands(dec, mode, rule)
    return reconstruct(shrunk)
