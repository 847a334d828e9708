"""Synthetic saturation-line records with a known generating formula.

Each station is

    base + c_wl * (wl - mean(wl)) + c_rain * (rain - mean(rain))
         + trend * (t / (n - 1) - 0.5) + amp * sin(2 pi t / period + phase) + noise

with every coefficient written to the sidecar, so imputations and
forecasts can be checked against the pre-blanking truth.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import Flag, MonitoringSeries, write_csv
from .errors import ConfigError
from .utils import atomic_write_json, substream

STATIONS = ("no8", "no13", "no17", "no21", "no28", "no33")
# station statistics of the monitoring record (metres)
TABLE1_MEAN = (4.57, 7.73, 11.32, 10.67, 14.52, 15.03)
TABLE1_MIN = (4.08, 6.86, 11.14, 10.08, 14.04, 14.70)
TABLE1_MAX = (4.95, 8.18, 11.40, 10.88, 15.40, 15.41)

RAINFALL = "rainfall"
WATER_LEVEL = "water_level"
START_EPOCH = 1521331200  # 2018-03-18T00:00:00Z
INTERVAL_SECONDS = 7200


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings.

    Coupling, amplitude and trend are fractions of each station's spread
    scale (max - min) / 6; noise sigma is ``noise_fraction`` times the
    half-range of the clean station signal.
    """

    n: int = 8365
    stations: tuple = STATIONS
    base_levels: tuple = TABLE1_MEAN
    spreads: tuple = tuple(hi - lo for lo, hi in zip(TABLE1_MIN, TABLE1_MAX))
    water_level_coupling: float = 0.6
    rainfall_coupling: float = 0.1
    seasonal_amplitude: float = 0.5
    seasonal_period: float = 84.0
    trend: float = 0.3
    noise_fraction: float = 0.02
    missing_fraction: float = 0.0
    seed: int = 0
    start: int = START_EPOCH
    interval: int = INTERVAL_SECONDS
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 200:
            raise ConfigError(f"synthetic length must be >= 200, got {self.n}")
        if not 0.0 <= self.missing_fraction < 1.0:
            raise ConfigError(f"missing fraction must be in [0, 1), got {self.missing_fraction}")
        if self.noise_fraction < 0:
            raise ConfigError("noise fraction must be non-negative")
        if not (len(self.stations) == len(self.base_levels) == len(self.spreads)):
            raise ConfigError("stations, base levels and spreads must have equal lengths")
        if self.seasonal_period <= 0:
            raise ConfigError("seasonal period must be positive")

    def to_dict(self):
        d = asdict(self)
        for k in ("stations", "base_levels", "spreads"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("stations", "base_levels", "spreads"):
            if k in d:
                d[k] = tuple(d[k])
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown synthetic spec keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SyntheticData:
    series: MonitoringSeries
    truth: MonitoringSeries
    clean: dict
    coefficients: dict
    spec: SyntheticSpec


def _drivers(spec, rng):
    n = spec.n
    wet = rng.random(n) < 0.08
    rain = np.where(wet, rng.gamma(0.7, 6.0, size=n), 0.0)
    store = np.zeros(n)
    for t in range(1, n):
        store[t] = 0.97 * store[t - 1] + 0.03 * rain[t - 1]
    t = np.arange(n)
    level = 30.0 + 0.4 * np.sin(2 * np.pi * t / 720.0) + 0.8 * store + 0.05 * rng.standard_normal(n).cumsum() / np.sqrt(n)
    return rain, level


def generate(spec=SyntheticSpec()):
    rng = substream(spec.seed, "synth")
    rain, level = _drivers(spec, rng)
    n = spec.n
    t = np.arange(n)
    rain_c = rain - rain.mean()
    level_c = level - level.mean()
    rain_sd = rain.std() or 1.0
    level_sd = level.std() or 1.0
    columns = {}
    clean = {}
    coeffs = {}
    for k, (name, base, spread) in enumerate(zip(spec.stations, spec.base_levels, spec.spreads)):
        scale = spread / 6.0
        c_wl = spec.water_level_coupling * scale / level_sd
        c_rain = spec.rainfall_coupling * scale / rain_sd
        trend = spec.trend * scale
        amp = spec.seasonal_amplitude * scale
        phase = 2 * np.pi * k / max(len(spec.stations), 1)
        signal = (
            base
            + c_wl * level_c
            + c_rain * rain_c
            + trend * (t / (n - 1) - 0.5)
            + amp * np.sin(2 * np.pi * t / spec.seasonal_period + phase)
        )
        sigma = spec.noise_fraction * 0.5 * np.ptp(signal)
        columns[name] = signal + sigma * rng.standard_normal(n)
        clean[name] = signal
        coeffs[name] = {
            "base": base,
            "water_level": c_wl,
            "water_level_mean": float(level.mean()),
            "rainfall": c_rain,
            "rainfall_mean": float(rain.mean()),
            "trend": trend,
            "seasonal_amplitude": amp,
            "seasonal_period": spec.seasonal_period,
            "phase": phase,
            "noise_sigma": sigma,
        }
    columns[RAINFALL] = rain
    columns[WATER_LEVEL] = level
    channels = tuple(spec.stations) + (RAINFALL, WATER_LEVEL)
    values = np.column_stack([columns[c] for c in channels])
    timestamps = spec.start + spec.interval * t
    truth = MonitoringSeries(timestamps, channels, values)

    flags = np.zeros(values.shape, dtype=np.int8)
    if spec.missing_fraction > 0:
        blank_rng = substream(spec.seed, "synth-missing")
        n_blank = int(round(spec.missing_fraction * n))
        # only station columns are blanked; the drivers stay complete
        for j in range(len(spec.stations)):
            rows = blank_rng.choice(n, size=n_blank, replace=False)
            flags[rows, j] = Flag.MISSING
    series = MonitoringSeries(timestamps, channels, values, flags)
    return SyntheticData(series, truth, clean, coeffs, spec)


def write_synthetic(data, out_dir, name="synth"):
    """Write ``<name>.csv``, the truth sidecar ``<name>_truth.csv`` and ``<name>_spec.json``."""
    out = Path(out_dir)
    csv_path = write_csv(data.series, out / f"{name}.csv")
    truth_path = write_csv(data.truth, out / f"{name}_truth.csv")
    meta_path = atomic_write_json(
        out / f"{name}_spec.json", {"spec": data.spec.to_dict(), "coefficients": data.coefficients}
    )
    return csv_path, truth_path, meta_path


def synth(spec=SyntheticSpec(), out_dir=None, name="synth"):
    data = generate(spec)
    if out_dir is not None:
        write_synthetic(data, out_dir, name)
    return data


def load_spec(path):
    with open(path, encoding="utf-8") as fh:
        return SyntheticSpec.from_dict(json.load(fh))
