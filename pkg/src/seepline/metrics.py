"""Forecast error metrics and comparison reports."""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import List, Optional

import numpy as np

from .errors import ConfigError, DataError, DegenerateVarianceError, SchemaError, ZeroDenominatorError
from .utils import atomic_write_text, format_float

MAPE_GUARD = 1e-8


def _pair(truth, pred):
    truth = np.asarray(truth, dtype=np.float64).ravel()
    pred = np.asarray(pred, dtype=np.float64).ravel()
    if truth.shape != pred.shape:
        raise SchemaError(f"truth and prediction lengths differ: {truth.size} vs {pred.size}")
    if truth.size == 0:
        raise SchemaError("metrics need at least one point")
    return truth, pred


def rmse(truth, pred):
    truth, pred = _pair(truth, pred)
    return float(np.sqrt(np.mean((truth - pred) ** 2)))


def mape(truth, pred, guard=MAPE_GUARD):
    """Mean absolute percentage error, in percent."""
    truth, pred = _pair(truth, pred)
    small = np.abs(truth) <= guard
    if small.any():
        i = int(np.argmax(small))
        raise ZeroDenominatorError(i, float(truth[i]))
    return float(np.mean(np.abs((truth - pred) / truth)) * 100.0)


def r2(truth, pred):
    truth, pred = _pair(truth, pred)
    if truth.size < 2:
        raise SchemaError("r2 needs at least two points")
    ss_tot = np.sum((truth - truth.mean()) ** 2)
    if ss_tot == 0 or np.ptp(truth) == 0:
        raise DegenerateVarianceError("r2 is undefined for constant truth")
    return float(1.0 - np.sum((truth - pred) ** 2) / ss_tot)


@dataclass
class EvalRow:
    station: str
    model: str
    rmse: Optional[float]
    mape: Optional[float]
    r2: Optional[float]
    runtime_seconds: float = 0.0
    n: int = 0
    error: Optional[str] = None

    def __post_init__(self):
        if self.rmse is None:
            if self.error is None:
                raise DataError("a row without metrics must carry an error")
            return
        if not (self.rmse >= 0 and self.r2 <= 1 and self.n >= 1):
            raise DataError(f"metric row violates bounds: {self}")
        if self.mape is not None and not self.mape >= 0:
            raise DataError(f"negative MAPE in {self}")


def evaluate_arrays(truth, pred, station, model, runtime_seconds=0.0):
    """One report row; a MAPE guard trip leaves mape empty and records why."""
    truth, pred = _pair(truth, pred)
    try:
        m, err = mape(truth, pred), None
    except ZeroDenominatorError as exc:
        m, err = None, str(exc)
    return EvalRow(station, model, rmse(truth, pred), m, r2(truth, pred), float(runtime_seconds), int(truth.size), err)


_COLUMNS = [f.name for f in fields(EvalRow)]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format_float(v)
    return str(v)


class EvalReport:
    def __init__(self, rows=None):
        self.rows: List[EvalRow] = list(rows or [])

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __eq__(self, other):
        return isinstance(other, EvalReport) and self.rows == other.rows

    def append(self, row):
        self.rows.append(row)

    def find(self, station, model):
        for r in self.rows:
            if r.station == station and r.model == model:
                return r
        raise KeyError((station, model))

    def metrics_only(self):
        """Rows without wall-clock runtime, for reproducibility digests."""
        return [{k: v for k, v in asdict(r).items() if k != "runtime_seconds"} for r in self.rows]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_COLUMNS)
        for r in self.rows:
            w.writerow([_cell(getattr(r, c)) for c in _COLUMNS])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rd = csv.DictReader(io.StringIO(text))
        rows = []
        for rec in rd:
            def num(key):
                return None if rec[key] == "" else float(rec[key])

            rows.append(EvalRow(
                rec["station"], rec["model"], num("rmse"), num("mape"), num("r2"),
                float(rec["runtime_seconds"] or 0.0), int(rec["n"] or 0), rec["error"] or None,
            ))
        return cls(rows)

    def to_json(self):
        return json.dumps({"rows": [asdict(r) for r in self.rows]}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls([EvalRow(**r) for r in json.loads(text)["rows"]])

    def to_markdown(self, digits=4):
        def fmt(v):
            return "-" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.{digits}f}"

        models = list(dict.fromkeys(r.model for r in self.rows))
        stations = list(dict.fromkeys(r.station for r in self.rows))
        if len(models) == 1 and len(stations) > 1:
            # metrics down, stations across
            lines = ["| Metrics | " + " | ".join(stations) + " |", "|---" * (len(stations) + 1) + "|"]
            for label, key in (("RMSE", "rmse"), ("MAPE", "mape"), ("R2", "r2")):
                cells = [fmt(getattr(self.find(s, models[0]), key)) for s in stations]
                lines.append(f"| {label} | " + " | ".join(cells) + " |")
            return "\n".join(lines) + "\n"
        lines = ["| Station | Model | RMSE | MAPE | R2 | Runtime (s) |", "|---|---|---|---|---|---|"]
        for r in self.rows:
            lines.append(
                f"| {r.station} | {r.model} | {fmt(r.rmse)} | {fmt(r.mape)} | {fmt(r.r2)} | {r.runtime_seconds:.2f} |"
            )
        return "\n".join(lines) + "\n"

    def render(self, fmt="csv"):
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        if fmt == "markdown":
            return self.to_markdown()
        raise ConfigError(f"unknown report format {fmt!r}")

    def write(self, path, fmt="csv"):
        return atomic_write_text(path, self.render(fmt))
