import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_series
from seepline.data import Flag
from seepline.errors import (
    ConfigError,
    DegenerateVarianceError,
    InsufficientDataError,
    SchemaError,
    UnimputableRowError,
)
from seepline.imputation import (
    CorrelationMatrix,
    ForestParams,
    RandomForest,
    correlation_matrix,
    correlation_screen,
    ishigami,
    ishigami_first_order,
    ni_analyze,
    ni_impute,
    pearson,
    rf_fit,
    rf_predict,
    sobol_indices,
)


def pearson_raw_sums(m, n):
    """Eq.-1 style evaluation from raw sums."""
    k = len(m)
    sm, sn = sum(m), sum(n)
    smn = sum(a * b for a, b in zip(m, n))
    smm = sum(a * a for a in m)
    snn = sum(b * b for b in n)
    return (k * smn - sm * sn) / math.sqrt((k * smm - sm**2) * (k * snn - sn**2))


# --- pearson / screening ----------------------------------------------------


def test_pearson_examples():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    assert pearson(a, a) == 1.0
    assert pearson(a, -a) == -1.0
    b = np.array([2.0, 1.0, 4.0, 3.0])
    assert pearson(a, b) == pytest.approx(pearson_raw_sums(a, b), abs=1e-15)
    assert pearson(a, b) == pytest.approx(0.6)


def test_pearson_errors():
    with pytest.raises(DegenerateVarianceError):
        pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(SchemaError):
        pearson([1.0, 2.0], [1.0, 2.0, 3.0])


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=3, max_size=40),
    st.floats(0.1, 10),
    st.floats(-50, 50),
)
def test_pearson_symmetry_and_affine_invariance(pairs, scale, shift):
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    if np.ptp(a) < 1e-3 or np.ptp(b) < 1e-3:
        return
    r = pearson(a, b)
    assert -1 <= r <= 1
    assert pearson(b, a) == pytest.approx(r, abs=1e-12)
    assert pearson(scale * a + shift, b) == pytest.approx(r, abs=1e-9)
    ref = pearson_raw_sums(list(a), list(b))
    assert r == pytest.approx(ref, abs=1e-6)


def test_matrix_invariants(rng):
    s = make_series({c: rng.normal(size=60) for c in "abcd"})
    m = correlation_matrix(s)
    assert np.all(np.diag(m.coefficients) == 1.0)
    assert np.array_equal(m.coefficients, m.coefficients.T)
    assert m["a", "b"] == pearson(s.column("a"), s.column("b"))


def test_matrix_csv_round_trip(rng):
    s = make_series({c: rng.normal(size=30) for c in ["x1", "x2", "x3", "x4", "x5", "x6"]})
    m = correlation_matrix(s)
    back = CorrelationMatrix.from_csv(m.to_csv())
    assert back.channels == m.channels and np.array_equal(back.coefficients, m.coefficients)
    rows = m.to_csv().strip().split("\n")
    assert len(rows) == 7 and all(len(r.split(",")) == 7 for r in rows)


def test_screen_drops_later_duplicate(rng):
    x = rng.normal(size=50)
    s = make_series({"a": x, "b": x.copy(), "c": rng.normal(size=50)})
    kept, _ = correlation_screen(s, 0.8)
    assert kept == ["a", "c"]


def test_screen_independent_noise_all_kept():
    rng = np.random.default_rng(2024)
    s = make_series({f"n{i}": rng.normal(size=500) for i in range(5)})
    m = correlation_matrix(s).coefficients
    off = np.abs(m[~np.eye(5, dtype=bool)])
    assert off.max() < 0.8
    kept, _ = correlation_screen(s, 0.8)
    assert kept == list(s.channels)


def test_screen_unreachable_threshold(rng):
    x = rng.normal(size=20)
    s = make_series({"a": x, "b": x, "c": -x})
    assert correlation_screen(s, 1.1)[0] == ["a", "b", "c"]


def test_screen_constant_channel_propagates(rng):
    s = make_series({"a": rng.normal(size=10), "b": np.ones(10)})
    with pytest.raises(DegenerateVarianceError):
        correlation_screen(s)


# --- random forest --------------------------------------------------------


def test_constant_target():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    model = rf_fit(X, np.full(40, 2.5), ForestParams(n_trees=5))
    assert np.all(model.predict(rng.normal(size=(10, 3))) == 2.5)
    assert np.all(model.importances == 0)


def test_dominant_feature_importance():
    rng = np.random.default_rng(1)
    X = np.column_stack([rng.uniform(0, 10, 400), rng.normal(size=400)])
    model = rf_fit(X, X[:, 0].copy(), ForestParams(n_trees=30, max_features=2, seed=4))
    assert model.importances[0] > 0.9
    assert model.importances.sum() == pytest.approx(1.0, abs=1e-9)


def test_importances_match_variance_reduction_accounting():
    rng = np.random.default_rng(2)
    X = rng.uniform(size=(60, 2))
    y = 3 * X[:, 0] + 0.2 * rng.normal(size=60)
    params = ForestParams(n_trees=1, max_depth=3, bootstrap=False, max_features=2)
    model = rf_fit(X, y, params)
    tree = model.trees[0]
    # recompute SSE drops from the fitted structure on the canonical training rows
    order = np.lexsort((y, X[:, 1], X[:, 0]))
    Xc, yc = X[order], y[order]
    leaf = np.arange(len(yc))
    gains = np.zeros(2)
    node_rows = {0: leaf}
    for node in range(tree.n_nodes):
        rows = node_rows.get(node)
        if rows is None or tree.feature[node] < 0:
            continue
        f = tree.feature[node]
        mask = Xc[rows, f] <= tree.threshold[node]
        l, r = rows[mask], rows[~mask]
        sse = lambda v: float(np.sum((v - v.mean()) ** 2))
        gains[f] += sse(yc[rows]) - sse(yc[l]) - sse(yc[r])
        node_rows[tree.left[node]] = l
        node_rows[tree.right[node]] = r
    assert np.allclose(model.importances, gains / gains.sum(), atol=1e-9)


def test_single_stump_on_step():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    model = rf_fit(X, y, ForestParams(n_trees=1, max_depth=1, min_samples_leaf=1, bootstrap=False))
    tree = model.trees[0]
    assert tree.threshold[0] == 2.5
    assert model.predict(np.array([[1.5], [3.5]])).tolist() == [0.0, 1.0]
    assert rf_predict(model, np.array([0.0])) == 0.0


def test_single_tree_forest_equals_tree():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 2))
    y = X[:, 0] - X[:, 1]
    model = rf_fit(X, y, ForestParams(n_trees=1))
    Q = rng.normal(size=(20, 2))
    assert np.array_equal(model.predict(Q), model.trees[0].predict(Q))


def test_duplicated_tree_same_prediction():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(50, 2))
    model = rf_fit(X, X.sum(axis=1), ForestParams(n_trees=1))
    twice = RandomForest(model.trees * 2, model.importances, model.params, model.n_features)
    Q = rng.normal(size=(10, 2))
    assert np.array_equal(twice.predict(Q), model.predict(Q))


def test_linear_target_training_points():
    rng = np.random.default_rng(5)
    X = rng.uniform(1, 5, size=(300, 2))
    y = 2 * X[:, 0] + X[:, 1]
    model = rf_fit(X, y, ForestParams(n_trees=10, seed=9))
    pred = model.predict(X[:20])
    assert np.all(np.abs(pred - y[:20]) / y[:20] < 0.10)


def test_dimension_mismatch():
    rng = np.random.default_rng(6)
    model = rf_fit(rng.normal(size=(20, 2)), rng.normal(size=20), ForestParams(n_trees=2))
    with pytest.raises(SchemaError):
        model.predict(np.ones((3, 3)))


def test_empty_data():
    with pytest.raises(InsufficientDataError):
        rf_fit(np.empty((0, 2)), np.empty(0))


def test_row_permutation_invariance():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(80, 3))
    y = X @ [1.0, -2.0, 0.5]
    perm = rng.permutation(80)
    a = rf_fit(X, y, ForestParams(n_trees=8, seed=3))
    b = rf_fit(X[perm], y[perm], ForestParams(n_trees=8, seed=3))
    Q = rng.normal(size=(25, 3))
    assert np.array_equal(a.predict(Q), b.predict(Q))
    assert np.array_equal(a.importances, b.importances)


def test_forest_serialization(tmp_path):
    rng = np.random.default_rng(8)
    X = rng.normal(size=(60, 2))
    model = rf_fit(X, X[:, 0], ForestParams(n_trees=4), feature_names=["rainfall", "water_level"])
    model.save(tmp_path / "f.json")
    back = RandomForest.load(tmp_path / "f.json")
    assert np.array_equal(back.predict(X), model.predict(X))
    assert back.feature_names == ["rainfall", "water_level"]


def test_forest_params_validation():
    with pytest.raises(ConfigError):
        ForestParams(n_trees=0)


# --- Sobol ------------------------------------------------------------------


def test_dead_input_has_zero_indices():
    res = sobol_indices(lambda X: X[:, 0] ** 2 + X[:, 1], [[0, 1], [0, 1], [0, 1]], n=2048, seed=1)
    assert abs(res.first_order[2]) < 0.05 and abs(res.total_order[2]) < 0.05


def test_additive_equal_ranges():
    res = sobol_indices(lambda X: X[:, 0] + X[:, 1], [[0, 1], [0, 1]], n=2048, seed=2)
    assert np.allclose(res.first_order, [0.5, 0.5], atol=0.05)
    assert abs(res.first_order.sum() - 1) < 0.05
    assert np.all(res.first_order <= res.total_order + 0.05)


def test_additive_convergence():
    f = lambda X: X[:, 0] + 2 * X[:, 1]
    exact = np.array([0.2, 0.8])
    for seed in range(5):
        e1 = np.abs(sobol_indices(f, [[0, 1], [0, 1]], 256, seed).first_order - exact).max()
        e4 = np.abs(sobol_indices(f, [[0, 1], [0, 1]], 1024, seed).first_order - exact).max()
        assert e4 <= e1 + 0.02


def test_ishigami_analytic_values():
    ref = ishigami_first_order()
    assert np.allclose(ref, [0.3139, 0.4424, 0.0], atol=5e-5)
    res = sobol_indices(ishigami, [[-np.pi, np.pi]] * 3, n=4096, seed=0)
    assert np.all(np.abs(res.first_order - ref) < 0.05)


def test_sobol_on_forest_model():
    rng = np.random.default_rng(9)
    X = rng.uniform(size=(400, 2))
    model = rf_fit(X, 5 * X[:, 0] + 0.1 * X[:, 1], ForestParams(n_trees=10))
    res = sobol_indices(model, [[0, 1], [0, 1]], n=256, seed=3, names=["a", "b"])
    assert res.first_order[0] > res.first_order[1]
    assert res.to_dict()["names"] == ["a", "b"]


def test_sobol_deterministic():
    a = sobol_indices(ishigami, [[-np.pi, np.pi]] * 3, n=128, seed=5)
    b = sobol_indices(ishigami, [[-np.pi, np.pi]] * 3, n=128, seed=5)
    assert np.array_equal(a.first_order, b.first_order) and np.array_equal(a.total_order, b.total_order)


def test_sobol_errors():
    with pytest.raises(ConfigError):
        sobol_indices(ishigami, [[0, 1]] * 3, n=32)
    with pytest.raises(ConfigError):
        sobol_indices(ishigami, [[1, 0]] * 3, n=64)
    with pytest.raises(DegenerateVarianceError):
        sobol_indices(lambda X: np.zeros(len(X)), [[0, 1]], n=64)


# --- NI imputation ---------------------------------------------------------


def _ni_series(n=600, frac=0.1, seed=0):
    rng = np.random.default_rng(seed)
    rain = rng.gamma(0.7, 6.0, n) * (rng.random(n) < 0.3)
    level = 30 + rng.normal(size=n).cumsum() * 0.05
    target = 2 * rain + level
    s = make_series({"target": target, "rainfall": rain, "water_level": level})
    gaps = rng.choice(n, int(frac * n), replace=False)
    fl = np.zeros((n, 3), dtype=np.int8)
    fl[gaps, 0] = Flag.MISSING
    return s.replace(flags=fl), target, gaps


def test_no_gaps_is_identity():
    s, _, _ = _ni_series(frac=0.0)
    assert ni_impute(s, "target") is s


def test_imputes_known_function():
    s, truth, gaps = _ni_series()
    out = ni_impute(s, "target", params=ForestParams(seed=1))
    rel = np.abs(out.column("target")[gaps] - truth[gaps]) / np.abs(truth[gaps])
    assert np.mean(rel < 0.05) >= 0.9
    assert np.all(out.flag_column("target")[gaps] == Flag.IMPUTED)


def test_observed_cells_untouched():
    s, _, gaps = _ni_series(seed=3)
    out = ni_impute(s, "target", params=ForestParams(n_trees=10))
    obs = s.flag_column("target") == Flag.OBSERVED
    assert np.array_equal(out.column("target")[obs], s.column("target")[obs])
    assert np.array_equal(out.flags[:, 1:], s.flags[:, 1:])


def test_abnormal_cells_replaced():
    s, truth, _ = _ni_series(frac=0.0, seed=4)
    fl = s.flags.copy()
    fl[10, 0] = Flag.ABNORMAL
    out = ni_impute(s.replace(flags=fl), "target", params=ForestParams(n_trees=10))
    assert out.flags[10, 0] == Flag.IMPUTED


def test_all_missing_target():
    s, _, _ = _ni_series(frac=1.0)
    with pytest.raises(InsufficientDataError):
        ni_impute(s, "target")


def test_predictor_missing_at_gap():
    s, _, gaps = _ni_series(seed=5)
    vals = s.values.copy()
    fl = s.flags.copy()
    fl[gaps[0], 1] = Flag.MISSING
    with pytest.raises(UnimputableRowError) as info:
        ni_impute(s.replace(values=vals, flags=fl), "target")
    assert info.value.rows == [int(gaps[0])]


def test_analysis_ranks_true_drivers(small_synth):
    res = ni_analyze(small_synth.series, "no8", ["rainfall", "water_level"], params=ForestParams(n_trees=10), sobol_n=128)
    assert res.retained == ["rainfall", "water_level"]
    # water level carries most of the synthetic signal
    assert res.ranking()[0] == "water_level"
    assert res.sobol.first_order[1] > res.sobol.first_order[0]
    d = res.to_dict()
    assert set(d) == {"target", "retained", "importances", "sobol", "ranking"}


def test_analysis_screens_redundant_candidates(small_synth):
    res = ni_analyze(small_synth.series, "no8", params=ForestParams(n_trees=5), sobol_n=64)
    # candidates default to every other channel; the later of a correlated pair is dropped
    m = res.matrix.coefficients
    kept = [res.matrix.channels.index(c) for c in res.retained]
    assert all(abs(m[i, j]) <= 0.8 for i in kept for j in kept if i != j)
