import json

import numpy as np
import pytest

from pbselect.dataset import NO_SOLUTION
from pbselect.features import append_timestep, extract_basic
from pbselect.grid import make_grid
from pbselect.learners import (
    SchemaMismatchError,
    SingleClassError,
    TrainedModel,
    class_weights,
    fit_gradient_boosting,
    fit_knn,
    fit_random_forest,
    gini_impurity,
    grow_classification_tree,
    hyperparams_for,
    mdi_importance,
    tree_rng,
)
from pbselect.opb import parse_opb


def _blobs(n=400, d=6, classes=3, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = np.zeros(n, dtype=np.intp)
    y[X[:, 0] > 0] = 1
    y[(X[:, 0] <= 0) & (X[:, 1] > 0)] = 2 % classes
    if noise:
        flip = rng.random(n) < noise
        y[flip] = rng.integers(0, classes, flip.sum())
    return X, y


# --- decision tree -------------------------------------------------------------


def test_gini_impurity_value():
    assert gini_impurity(np.array([2.0, 2.0])) == pytest.approx(0.5)
    assert gini_impurity(np.array([4.0, 0.0])) == 0.0


def test_tree_perfectly_separable_single_split():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    tree = grow_classification_tree(X, y, np.ones(4), 2, tree_rng(0, 0), max_features=None)
    assert tree.nodes.feature.count(-1) == 2  # two leaves
    preds = np.argmax(tree.predict_dist_batch(X), axis=1)
    assert np.array_equal(preds, y)
    assert tree.nodes.threshold[0] == pytest.approx(1.5)


def test_tree_single_class_is_single_leaf():
    X = np.array([[0.0], [1.0], [2.0]])
    y = np.array([1, 1, 1])
    tree = grow_classification_tree(X, y, np.ones(3), 2, tree_rng(0, 0))
    assert tree.nodes.feature == [-1]
    assert tree.leaf_dist[0] == [0.0, 1.0]


def test_tree_thresholds_are_midpoints():
    X = np.array([[0.0], [4.0], [10.0], [11.0]])
    y = np.array([0, 0, 1, 1])
    tree = grow_classification_tree(X, y, np.ones(4), 2, tree_rng(0, 0), max_features=None)
    assert tree.nodes.threshold[0] == pytest.approx(7.0)


def test_tree_positive_gain_required():
    # identical feature values, mixed labels: no split possible
    X = np.zeros((4, 2))
    y = np.array([0, 1, 0, 1])
    tree = grow_classification_tree(X, y, np.ones(4), 2, tree_rng(0, 0))
    assert tree.nodes.feature == [-1]
    assert tree.leaf_dist[0] == [0.5, 0.5]


# --- random forest --------------------------------------------------------------


def test_forest_determinism_bit_identical():
    X, y = _blobs(300, seed=3, noise=0.05)
    a = fit_random_forest(X, y, 3, n_estimators=15, seed=11)
    b = fit_random_forest(X, y, 3, n_estimators=15, seed=11)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    c = fit_random_forest(X, y, 3, n_estimators=15, seed=12)
    assert json.dumps(a.to_dict()) != json.dumps(c.to_dict())


def test_forest_single_class_training():
    X = np.arange(10, dtype=float).reshape(-1, 1)
    y = np.ones(10, dtype=np.intp)
    model = fit_random_forest(X, y, 3, n_estimators=5, seed=0)
    assert np.all(model.predict(X) == 1)


def test_forest_probabilities_are_distributions():
    X, y = _blobs(200, seed=5, noise=0.1)
    model = fit_random_forest(X, y, 3, n_estimators=10, seed=1)
    probs = model.predict_proba(X)
    assert np.all(probs >= 0)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_forest_majority_vote_and_tie_break():
    X, y = _blobs(100, seed=6)
    model = fit_random_forest(X, y, 3, n_estimators=7, seed=2)
    row = X[0]
    label, probs = model.predict_one(row.tolist())
    assert label == int(np.argmax(probs))
    # manufactured exact tie: argmax must take the lowest class index
    import pbselect.learners.forest as forest_mod

    stub = forest_mod.ForestModel(
        trees=[], n_features=1, n_classes=2, n_estimators=0
    )
    stub.predict_proba_one = lambda values: [0.5, 0.5]
    label, _ = forest_mod.ForestModel.predict_one(stub, [0.0])
    assert label == 0


def test_forest_class_weights_validated():
    X, y = _blobs(50, seed=7)
    with pytest.raises(ValueError):
        fit_random_forest(X, y, 3, n_estimators=2, class_weight=np.ones(2))
    with pytest.raises(ValueError):
        fit_random_forest(X[:0], y[:0], 3)


# --- gradient boosting -----------------------------------------------------------


def test_gb_zero_learning_rate_predicts_prior():
    X, y = _blobs(120, seed=8)
    model = fit_gradient_boosting(X, y, 3, n_estimators=5, learning_rate=0.0, seed=0)
    majority = int(np.bincount(y).argmax())
    assert np.all(model.predict(X) == majority)


def test_gb_separable_data_high_accuracy():
    X, y = _blobs(300, seed=9)
    model = fit_gradient_boosting(X, y, 3, n_estimators=100, learning_rate=0.25, seed=0)
    assert np.mean(model.predict(X) == y) >= 0.99


def test_gb_loss_non_increasing_at_quarter_rate():
    X, y = _blobs(250, seed=10, noise=0.1)
    model = fit_gradient_boosting(X, y, 3, n_estimators=60, learning_rate=0.25, seed=3)
    losses = model.train_losses
    assert len(losses) == 61
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_gb_single_class_rejected():
    X = np.zeros((5, 2))
    y = np.zeros(5, dtype=np.intp)
    with pytest.raises(SingleClassError):
        fit_gradient_boosting(X, y, 3)


def test_gb_determinism():
    X, y = _blobs(150, seed=11, noise=0.05)
    a = fit_gradient_boosting(X, y, 3, n_estimators=10, learning_rate=0.25, seed=4)
    b = fit_gradient_boosting(X, y, 3, n_estimators=10, learning_rate=0.25, seed=4)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


# --- knn -------------------------------------------------------------------------


def test_knn_k1_returns_training_label():
    X, y = _blobs(80, seed=12)
    model = fit_knn(X, y, 1, 3)
    assert np.array_equal(model.predict(X), y)


def test_knn_k_equals_n_returns_global_majority():
    X, y = _blobs(60, seed=13)
    model = fit_knn(X, y, len(X), 3)
    majority = int(np.bincount(y, minlength=3).argmax())
    assert np.all(model.predict(X[:10]) == majority)


def test_knn_k_out_of_range():
    X, y = _blobs(10, seed=14)
    with pytest.raises(ValueError):
        fit_knn(X, y, 11, 3)
    with pytest.raises(ValueError):
        fit_knn(X, y, 0, 3)


def test_knn_zero_variance_feature_passes_through():
    X = np.array([[0.0, 5.0], [1.0, 5.0], [2.0, 5.0]])
    y = np.array([0, 0, 1])
    model = fit_knn(X, y, 1, 2)
    assert model.std[1] == 1.0
    assert model.predict_one([2.0, 5.0])[0] == 1


def test_knn_distance_tie_includes_earlier_row():
    # two training points equidistant from the query; stable order wins
    X = np.array([[0.0], [2.0]])
    y = np.array([1, 0])
    model = fit_knn(X, y, 1, 2, standardize=False)
    assert model.predict_one([1.0])[0] == 1


def test_knn_vote_tie_breaks_by_class_order():
    X = np.array([[0.0], [0.2], [1.0], [1.2]])
    y = np.array([1, 1, 0, 0])
    model = fit_knn(X, y, 4, 2, standardize=False)
    label, votes = model.predict_one([0.6])
    assert votes == [0.5, 0.5]
    assert label == 0


# --- class weights and MDI --------------------------------------------------------


def test_class_weights_uniform():
    assert np.array_equal(class_weights(np.array([0, 1, 1]), "uniform", 3), np.ones(3))


def test_class_weights_inverse_frequency():
    y = np.array([0] * 90 + [1] * 10)
    w = class_weights(y, "inverse-frequency", 2)
    assert w[0] == pytest.approx(100 / (2 * 90))
    assert w[1] == pytest.approx(5.0)


def test_class_weights_balanced_is_unit():
    y = np.array([0] * 50 + [1] * 50)
    assert np.allclose(class_weights(y, "inverse-frequency", 2), 1.0)


def test_class_weights_absent_class_inert():
    w = class_weights(np.array([0, 0, 2]), "inverse-frequency", 4)
    assert w[1] == 1.0 and w[3] == 1.0


def test_mdi_single_feature_is_one():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    model = fit_random_forest(X, y, 2, n_estimators=5, seed=0)
    assert mdi_importance(model).tolist() == pytest.approx([1.0])


def test_mdi_unused_feature_zero_and_sums_to_one():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 4))
    X[:, 3] = 7.0  # constant, can never split
    y = (X[:, 0] > 0).astype(np.intp)
    rf = fit_random_forest(X, y, 2, n_estimators=10, seed=5)
    imp = mdi_importance(rf)
    assert imp[3] == 0.0
    assert imp.sum() == pytest.approx(1.0, abs=1e-9)
    gb = fit_gradient_boosting(X, y, 2, n_estimators=10, learning_rate=0.25, seed=5)
    imp = mdi_importance(gb)
    assert imp[3] == 0.0
    assert imp.sum() == pytest.approx(1.0, abs=1e-9)


# --- trained-model container -------------------------------------------------------


def _toy_trained(tmp_path=None, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 3))
    y = (X[:, 0] > 0).astype(np.intp)
    model = fit_random_forest(X, y, 3, n_estimators=5, seed=seed)
    return TrainedModel(
        family="rf",
        schema="basic",
        encoding="index",
        vocabulary=["A", "B", NO_SOLUTION],
        params={"n_estimators": 5, "grid": {"count": 4, "horizon": 100.0, "t_min": 1.0}},
        seed=seed,
        model=model,
        mdi=mdi_importance(model).tolist(),
    )


def test_trained_model_save_load_roundtrip(tmp_path):
    tm = _toy_trained()
    path = tmp_path / "model.json"
    tm.save(path)
    again = TrainedModel.load(path)
    assert again.vocabulary == tm.vocabulary
    assert again.params == tm.params
    X = np.random.default_rng(3).normal(size=(20, 3))
    assert np.array_equal(again.predict_batch(X), tm.predict_batch(X))
    # identical fits write byte-identical files
    other = tmp_path / "model2.json"
    _toy_trained().save(other)
    assert path.read_bytes() == other.read_bytes()


def test_trained_model_rejects_schema_mismatch(tmp_path):
    tm = _toy_trained()
    grid = make_grid(4, 100.0, 1.0)
    inst = parse_opb("* #variable= 2 #constraint= 1\nmin: +1 x1 ;\n+1 x1 >= 0 ;\n")
    good = append_timestep(extract_basic(inst), 1, grid)
    label, probs = tm.predict_vector(good)
    assert label in tm.vocabulary
    assert sum(probs.values()) == pytest.approx(1.0)
    from pbselect.features import extract_nonlinear

    wrong_schema = append_timestep(extract_nonlinear(inst), 1, grid)
    with pytest.raises(SchemaMismatchError):
        tm.predict_vector(wrong_schema)
    with pytest.raises(SchemaMismatchError):
        tm.predict_vector(extract_basic(inst))  # timestep missing
    with pytest.raises(SchemaMismatchError):
        tm.predict_batch(np.zeros((2, 7)))


def test_trained_model_version_check(tmp_path):
    tm = _toy_trained()
    path = tmp_path / "model.json"
    tm.save(path)
    data = json.loads(path.read_text())
    data["version"] = 99
    path.write_text(json.dumps(data))
    with pytest.raises(ValueError):
        TrainedModel.load(path)
    path.write_text('{"format": "something-else"}')
    with pytest.raises(ValueError):
        TrainedModel.load(path)


def test_describe_mentions_params_and_mdi(tmp_path):
    text = _toy_trained().describe()
    assert "family: rf" in text
    assert "mdi_importance" in text


def test_hyperparameter_table():
    assert hyperparams_for("rf", "nonlinear") == {
        "n_estimators": 100,
        "max_features": "sqrt",
        "criterion": "gini",
    }
    assert hyperparams_for("gb", "basic")["learning_rate"] == 0.5
    assert hyperparams_for("gb", "nonlinear")["learning_rate"] == 0.25
    assert hyperparams_for("gb", "linear")["learning_rate"] == 0.1
    assert hyperparams_for("gb", "linear")["max_depth"] == 3
    assert hyperparams_for("knn", "basic")["n_neighbors"] == 13
    assert hyperparams_for("knn", "nonlinear")["n_neighbors"] == 21
    assert hyperparams_for("knn", "linear")["n_neighbors"] == 21
    with pytest.raises(ValueError):
        hyperparams_for("rf", "mystery")
