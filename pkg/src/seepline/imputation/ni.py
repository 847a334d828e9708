"""Numerical-inversion imputation: rebuild gaps in a channel from its drivers."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..data import Flag
from ..errors import InsufficientDataError, SchemaError, UnimputableRowError
from .correlation import CorrelationMatrix, correlation_screen
from .forest import ForestParams, RandomForest, rf_fit
from .sobol import SobolResult, sobol_indices

DEFAULT_PREDICTORS = ("rainfall", "water_level")
MIN_FIT_ROWS = 50
GAP_FLAGS = (Flag.MISSING, Flag.ABNORMAL)


def _fit_rows(series, target, predictors):
    t = series.flag_column(target)
    ok = t == Flag.OBSERVED
    for p in predictors:
        ok &= series.flag_column(p) != Flag.MISSING
    return ok


def _design(series, predictors):
    return np.column_stack([series.column(p) for p in predictors])


def fit_imputer(series, target, predictors=DEFAULT_PREDICTORS, params=ForestParams(), min_rows=MIN_FIT_ROWS):
    """Forest mapping predictor channels to ``target`` on rows where all are clean."""
    predictors = tuple(predictors)
    if target in predictors:
        raise SchemaError(f"target {target!r} cannot also be a predictor")
    rows = _fit_rows(series, target, predictors)
    if rows.sum() < min_rows:
        raise InsufficientDataError(f"{target!r}: {rows.sum()} clean rows, need {min_rows}")
    X = _design(series, predictors)[rows]
    y = series.column(target)[rows]
    return rf_fit(X, y, params, feature_names=predictors)


def ni_impute(
    series,
    target,
    predictors=DEFAULT_PREDICTORS,
    params=ForestParams(),
    model: Optional[RandomForest] = None,
    min_rows=MIN_FIT_ROWS,
):
    """Replace missing/abnormal ``target`` cells by forest predictions flagged ``IMPUTED``.

    Observed cells are never touched. Raises :class:`UnimputableRowError`
    if a predictor is missing where the target needs filling.
    """
    predictors = tuple(predictors)
    tflags = series.flag_column(target)
    gaps = np.isin(tflags, GAP_FLAGS)
    if not gaps.any():
        return series
    blocked = np.zeros(len(series), dtype=bool)
    for p in predictors:
        blocked |= series.flag_column(p) == Flag.MISSING
    if (gaps & blocked).any():
        raise UnimputableRowError(np.nonzero(gaps & blocked)[0].tolist())
    if model is None:
        model = fit_imputer(series, target, predictors, params, min_rows)
    pred = model.predict(_design(series, predictors)[gaps])
    j = series.index(target)
    values = series.values.copy()
    flags = series.flags.copy()
    values[gaps, j] = pred
    flags[gaps, j] = Flag.IMPUTED
    return series.replace(values=values, flags=flags)


@dataclass
class NIAnalysis:
    """Predictor selection evidence: screening, forest ranking and Sobol indices."""

    target: str
    matrix: CorrelationMatrix
    retained: list
    importances: dict
    sobol: SobolResult

    def ranking(self):
        return sorted(self.importances, key=lambda k: -self.importances[k])

    def to_dict(self):
        return {
            "target": self.target,
            "retained": list(self.retained),
            "importances": dict(self.importances),
            "sobol": self.sobol.to_dict(),
            "ranking": self.ranking(),
        }


def ni_analyze(series, target, candidates=None, threshold=0.8, params=ForestParams(), sobol_n=1024, seed=0):
    """Screen candidate drivers, fit a forest on the survivors, score them with Sobol.

    Sobol bounds are the observed min/max of each retained feature.
    """
    if candidates is None:
        candidates = [c for c in series.channels if c != target]
    retained, matrix = correlation_screen(series, threshold, candidates)
    model = fit_imputer(series, target, retained, params)
    rows = _fit_rows(series, target, retained)
    X = _design(series, retained)[rows]
    bounds = np.column_stack([X.min(axis=0), X.max(axis=0)])
    for i, (lo, hi) in enumerate(bounds):
        if lo == hi:
            bounds[i, 1] = lo + 1.0
    sob = sobol_indices(model, bounds, sobol_n, seed, names=retained)
    imp = {name: float(v) for name, v in zip(retained, model.importances)}
    return NIAnalysis(target, matrix, retained, imp, sob)
