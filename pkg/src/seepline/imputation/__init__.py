from .correlation import CorrelationMatrix, correlation_matrix, correlation_screen, pearson
from .forest import ForestParams, RandomForest, RegressionTree, rf_fit, rf_predict
from .ni import DEFAULT_PREDICTORS, NIAnalysis, fit_imputer, ni_analyze, ni_impute
from .sobol import SobolResult, ishigami, ishigami_first_order, sobol_indices

__all__ = [
    "CorrelationMatrix",
    "DEFAULT_PREDICTORS",
    "ForestParams",
    "NIAnalysis",
    "RandomForest",
    "RegressionTree",
    "SobolResult",
    "correlation_matrix",
    "correlation_screen",
    "fit_imputer",
    "ishigami",
    "ishigami_first_order",
    "ni_analyze",
    "ni_impute",
    "pearson",
    "rf_fit",
    "rf_predict",
    "sobol_indices",
]
