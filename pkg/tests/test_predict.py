"""Prediction layer: dataset assembly, projection, search, nested CV, persistence."""

import json
import math

import numpy as np
import pytest
from sklearn.naive_bayes import GaussianNB as SkGaussianNB
from sklearn.neighbors import KNeighborsClassifier
from sklearn.svm import SVC

from dialoglens.classifiers import (
    GaussianNB,
    KNearest,
    RandomForest,
    SupportVectorMachine,
)
from dialoglens.predict import (
    CLASS_LABELS,
    Choice,
    Dataset,
    EvaluationResult,
    GridSearch,
    HyperParams,
    IntRange,
    LogUniform,
    RandomProjection,
    RandomSearch,
    TrainedModel,
    Uniform,
    accuracy,
    confusion_matrix,
    dataset_from_table,
    default_output_dim,
    default_search,
    derive_seed,
    evaluate_model,
    evaluation_json,
    make_classifier,
    nested_cv,
    stratified_folds,
    train_model,
)

from conftest import make_table, simple_marks


def blobs(rng, centers, n_per, spread=0.3):
    """Gaussian clusters around the given centers, labeled by cluster."""
    centers = np.asarray(centers, dtype=np.float64)
    X = np.vstack(
        [c + spread * rng.standard_normal((n_per, centers.shape[1])) for c in centers]
    )
    y = np.repeat(np.arange(centers.shape[0]), n_per)
    return X, y


def toy_dataset(rng, n_per=8, d=4, sep=2.0):
    """Three classes separated along the first axis, mild noise elsewhere."""
    means = np.zeros((3, d))
    means[0, 0] = sep
    means[2, 0] = -sep
    X = np.vstack([m + rng.standard_normal((n_per, d)) for m in means])
    y = np.repeat(np.arange(3), n_per)
    keys = tuple((f"G{i:02d}", 1 + i % 4) for i in range(3 * n_per))
    return Dataset(X, y, tuple(f"F{j}" for j in range(d)), keys)


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(7, "rp", 3) == derive_seed(7, "rp", 3)

    def test_varies_with_master_and_parts(self):
        seen = {
            derive_seed(0),
            derive_seed(1),
            derive_seed(0, "a"),
            derive_seed(0, "b"),
            derive_seed(0, "a", 1),
            derive_seed(0, 1, "a"),
        }
        assert len(seen) == 6

    def test_separator_prevents_concatenation_collisions(self):
        assert derive_seed(0, "a", "b") != derive_seed(0, "ab")

    def test_fits_in_64_bits(self):
        for s in (0, 1, 2**31, 12345):
            v = derive_seed(s, "x")
            assert 0 <= v < 2**64


LABELED_VALUES = {
    ("G1", 1): {"A": 1.0, "B": 5.0},
    ("G2", 1): {"A": 3.0},
    ("G3", 1): {"A": 5.0, "B": 1.0},
    ("G1", 2): {"A": 10.0, "B": 7.0},
    ("G2", 2): {"B": 9.0},
    ("G3", 2): {"A": 2.0, "B": 3.0},
}


def labeled_table():
    return make_table(
        LABELED_VALUES, simple_marks({"G1": 90.0, "G2": 70.0, "G3": 50.0})
    )


class TestDatasetAssembly:
    def test_matrix_medians_and_labels(self):
        ds, imp = dataset_from_table(labeled_table(), ["A", "B"])
        # A: week medians 3 and 6; B: week medians 3 and 7
        expected = np.array(
            [
                [1.0, 5.0],
                [10.0, 7.0],
                [3.0, 3.0],
                [6.0, 9.0],
                [5.0, 1.0],
                [2.0, 3.0],
            ]
        )
        np.testing.assert_array_equal(ds.X, expected)
        np.testing.assert_array_equal(ds.y, [0, 0, 1, 1, 2, 2])
        assert ds.keys == (
            ("G1", 1),
            ("G1", 2),
            ("G2", 1),
            ("G2", 2),
            ("G3", 1),
            ("G3", 2),
        )
        assert ds.feature_names == ("A", "B")
        assert imp.filled == 2
        assert imp.global_medians == {"A": 3.0, "B": 5.0}

    def test_imputation_falls_back_to_global_median(self):
        _, imp = dataset_from_table(labeled_table(), ["A", "B"])
        assert imp.value_for("A", 2) == 6.0
        assert imp.value_for("A", 99) == 3.0

    def test_requires_labels(self):
        with pytest.raises(ValueError, match="label"):
            dataset_from_table(make_table(LABELED_VALUES), ["A"])

    def test_rejects_empty_selection(self):
        with pytest.raises(ValueError, match="no features"):
            dataset_from_table(labeled_table(), [])

    def test_rejects_feature_absent_everywhere(self):
        with pytest.raises(ValueError, match="Z"):
            dataset_from_table(labeled_table(), ["A", "Z"])

    def test_dataset_validation(self):
        X = np.zeros((3, 2))
        names = ("A", "B")
        keys = (("G1", 1), ("G2", 1), ("G3", 1))
        with pytest.raises(ValueError):
            Dataset(X, np.array([0, 1]), names, keys)
        with pytest.raises(ValueError):
            Dataset(X, np.array([0, 1, 3]), names, keys)
        bad = X.copy()
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            Dataset(bad, np.array([0, 1, 2]), names, keys)

    def test_with_labels_swaps_y_only(self):
        ds, _ = dataset_from_table(labeled_table(), ["A"])
        swapped = ds.with_labels(np.array([2, 2, 1, 1, 0, 0]))
        np.testing.assert_array_equal(swapped.X, ds.X)
        np.testing.assert_array_equal(swapped.y, [2, 2, 1, 1, 0, 0])
        assert swapped.keys == ds.keys


class TestProjection:
    def test_ratio_dimensions(self):
        assert default_output_dim(62) == 45
        assert default_output_dim(124) == 90
        assert default_output_dim(10) == 7
        assert default_output_dim(1) == 1

    def test_output_dim_bounds(self):
        for d in range(1, 101):
            out = default_output_dim(d)
            assert 1 <= out <= d

    def test_fit_is_deterministic(self):
        a = RandomProjection.fit(62, seed=7)
        b = RandomProjection.fit(62, seed=7)
        np.testing.assert_array_equal(a.matrix, b.matrix)
        assert a.d_out == 45

    def test_distance_preservation(self, rng):
        # 200 points, 62 -> 45 dims: nearly all pairwise distances
        # should survive within 45 percent
        X = rng.standard_normal((200, 62))
        proj = RandomProjection.fit(62, seed=3).project(X)
        orig = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
        new = np.sqrt(((proj[:, None, :] - proj[None, :, :]) ** 2).sum(axis=2))
        iu = np.triu_indices(200, k=1)
        ratio = new[iu] / orig[iu]
        ok = np.mean(np.abs(ratio - 1.0) <= 0.45)
        assert ok >= 0.95

    def test_projects_single_row(self):
        rp = RandomProjection.fit(6, seed=0, d_out=3)
        x = np.arange(6.0)
        np.testing.assert_allclose(rp.project(x), rp.matrix @ x)

    def test_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            RandomProjection.fit(10, seed=0, d_out=11)
        with pytest.raises(ValueError):
            RandomProjection.fit(10, seed=0, d_out=0)
        with pytest.raises(ValueError, match="columns"):
            RandomProjection.fit(10, seed=0).project(np.zeros((2, 9)))


class TestHyperParams:
    def test_values_canonical_order(self):
        hp = HyperParams.of("svm", kernel="rbf", C=1.0)
        assert hp.values == (("C", 1.0), ("kernel", "rbf"))
        assert hp.params() == {"C": 1.0, "kernel": "rbf"}

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            HyperParams.of("mlp")

    @pytest.mark.parametrize(
        "kind,values",
        [
            ("svm", {"C": 0.0}),
            ("svm", {"C": -1.0}),
            ("svm", {"kernel": "poly"}),
            ("svm", {"gamma": 0.0}),
            ("svm", {"gamma": "auto"}),
            ("knn", {"k": 0}),
            ("rf", {"trees": 0}),
            ("rf", {"max_depth": 0}),
            ("gnb", {"var_smoothing": -1e-9}),
        ],
    )
    def test_rejects_bad_values(self, kind, values):
        with pytest.raises(ValueError):
            HyperParams.of(kind, **values)

    def test_make_classifier_kinds(self):
        assert isinstance(make_classifier(HyperParams.of("svm"), 0), SupportVectorMachine)
        assert isinstance(make_classifier(HyperParams.of("gnb"), 0), GaussianNB)
        assert isinstance(make_classifier(HyperParams.of("knn"), 0), KNearest)
        assert isinstance(make_classifier(HyperParams.of("rf"), 0), RandomForest)


class TestSearchSpaces:
    def test_range_validation(self):
        with pytest.raises(ValueError):
            LogUniform(0.0, 1.0)
        with pytest.raises(ValueError):
            LogUniform(2.0, 1.0)
        with pytest.raises(ValueError):
            Uniform(1.0, 1.0)
        with pytest.raises(ValueError):
            IntRange(5, 4)
        with pytest.raises(ValueError):
            Choice(())

    def test_draws_stay_in_bounds(self, rng):
        lu = LogUniform(0.1, 100.0)
        u = Uniform(-1.0, 1.0)
        ir = IntRange(1, 15)
        ch = Choice(("a", "b"))
        for _ in range(200):
            assert 0.1 <= lu.draw(rng) <= 100.0
            assert -1.0 <= u.draw(rng) <= 1.0
            assert 1 <= ir.draw(rng) <= 15
            assert ch.draw(rng) in ("a", "b")

    def test_grid_candidates_in_order(self):
        grid = default_search("svm", "grid")
        cands = grid.candidates(0)
        assert len(cands) == 6
        assert [c.params()["C"] for c in cands] == [0.1, 0.1, 1.0, 1.0, 10.0, 10.0]
        assert [c.params()["kernel"] for c in cands] == ["linear", "rbf"] * 3
        assert all(c.params()["gamma"] == "scale" for c in cands)

    def test_grid_requires_candidates(self):
        with pytest.raises(ValueError):
            GridSearch(())

    def test_random_search_deterministic_per_seed(self):
        search = default_search("svm", "random:30")
        a = search.candidates(11)
        b = search.candidates(11)
        c = search.candidates(12)
        assert a == b
        assert a != c
        assert len(a) == 30

    def test_random_svm_draws_valid(self):
        for hp in default_search("svm", "random:50").candidates(5):
            p = hp.params()
            assert 0.1 <= p["C"] <= 100.0
            assert 0.01 <= p["gamma"] <= 2.0
            assert p["kernel"] in ("linear", "rbf")

    @pytest.mark.parametrize("kind", ["svm", "gnb", "knn", "rf"])
    def test_every_kind_has_both_strategies(self, kind):
        assert len(default_search(kind, "grid").candidates(0)) >= 1
        assert len(default_search(kind, "random:7").candidates(0)) == 7

    def test_malformed_spec(self):
        with pytest.raises(ValueError, match="search spec"):
            default_search("svm", "bayes")
        with pytest.raises(ValueError, match="kind"):
            default_search("mlp", "grid")
        with pytest.raises(ValueError):
            RandomSearch("svm", 0, (("C", LogUniform(1, 2)),))


class TestAccuracyCounts:
    def test_accuracy_fraction(self):
        assert accuracy([0, 1, 2, 1], [0, 1, 1, 1]) == 0.75

    def test_accuracy_validation(self):
        with pytest.raises(ValueError):
            accuracy([0, 1], [0])
        with pytest.raises(ValueError):
            accuracy([], [])

    def test_confusion_layout(self):
        m = confusion_matrix([0, 0, 1, 2, 2], [0, 1, 1, 2, 0], 3)
        expected = np.array([[1, 1, 0], [0, 1, 0], [1, 0, 1]])
        np.testing.assert_array_equal(m, expected)
        assert m.sum() == 5


class TestStratifiedFolds:
    def test_partition_properties(self):
        y = np.array([0] * 7 + [1] * 5 + [2] * 9)
        folds = stratified_folds(y, 3, np.random.default_rng(0))
        joined = np.concatenate(folds)
        assert sorted(joined.tolist()) == list(range(y.size))
        for c in (0, 1, 2):
            sizes = [int((y[f] == c).sum()) for f in folds]
            assert all(s >= 1 for s in sizes)
            assert max(sizes) - min(sizes) <= 1

    def test_rejects_fold_missing_a_class(self):
        with pytest.raises(ValueError, match="missing class"):
            stratified_folds(np.array([0, 0, 0, 1]), 2, np.random.default_rng(0))

    def test_deterministic_given_rng(self):
        y = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])
        a = stratified_folds(y, 3, np.random.default_rng(4))
        b = stratified_folds(y, 3, np.random.default_rng(4))
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa, fb)


GNB_GRID = GridSearch((HyperParams.of("gnb"),))


class TestNestedCV:
    def test_deterministic(self, rng):
        ds = toy_dataset(rng)
        a = nested_cv(ds, GNB_GRID, outer=3, inner=2, seed=5, use_projection=False)
        b = nested_cv(ds, GNB_GRID, outer=3, inner=2, seed=5, use_projection=False)
        assert evaluation_json(a) == evaluation_json(b)

    def test_confusion_trace_equals_pooled(self, rng):
        ds = toy_dataset(rng)
        res = nested_cv(ds, GNB_GRID, outer=3, inner=2, seed=5, use_projection=False)
        assert res.pooled_accuracy == np.trace(res.confusion) / ds.n
        assert res.confusion.sum() == ds.n
        assert sum(f.n_test for f in res.folds) == ds.n
        assert res.mean_accuracy == pytest.approx(
            np.mean([f.test_accuracy for f in res.folds])
        )

    def test_separable_data_scores_high(self, rng):
        ds = toy_dataset(rng, sep=4.0)
        res = nested_cv(ds, GNB_GRID, outer=3, inner=2, seed=1, use_projection=False)
        assert res.mean_accuracy >= 0.9

    def test_projection_path_runs(self, rng):
        ds = toy_dataset(rng, d=8, sep=4.0)
        res = nested_cv(ds, GNB_GRID, outer=3, inner=2, seed=1, d_out=4)
        assert 0.0 <= res.mean_accuracy <= 1.0

    def test_svm_random_search_deterministic(self, rng):
        ds = toy_dataset(rng, sep=3.0)
        search = default_search("svm", "random:3")
        a = nested_cv(ds, search, outer=3, inner=2, seed=2, use_projection=False)
        b = nested_cv(ds, search, outer=3, inner=2, seed=2, use_projection=False)
        assert evaluation_json(a) == evaluation_json(b)
        assert all(f.chosen.kind == "svm" for f in a.folds)

    def test_augment_hook_sees_labels(self, rng):
        # a column carrying the label on both sides makes GNB perfect,
        # proving the hook is applied to train and test matrices
        ds = toy_dataset(rng, sep=0.0)

        def cheat(X_tr, y_tr, X_te, y_te, hook_rng):
            return (
                np.column_stack([X_tr, y_tr.astype(float)]),
                np.column_stack([X_te, y_te.astype(float)]),
            )

        base = nested_cv(ds, GNB_GRID, outer=3, inner=2, seed=9, use_projection=False)
        leaked = nested_cv(
            ds, GNB_GRID, outer=3, inner=2, seed=9, use_projection=False, augment=cheat
        )
        assert leaked.mean_accuracy == 1.0
        assert base.mean_accuracy < 0.7

    def test_augment_rng_is_seeded(self, rng):
        ds = toy_dataset(rng)

        def jitter(X_tr, y_tr, X_te, y_te, hook_rng):
            col = hook_rng.standard_normal(X_tr.shape[0])
            return (
                np.column_stack([X_tr, col]),
                np.column_stack([X_te, hook_rng.standard_normal(X_te.shape[0])]),
            )

        a = nested_cv(ds, GNB_GRID, outer=3, inner=2, seed=4, use_projection=False, augment=jitter)
        b = nested_cv(ds, GNB_GRID, outer=3, inner=2, seed=4, use_projection=False, augment=jitter)
        assert evaluation_json(a) == evaluation_json(b)

    def test_rejects_too_few_rows(self, rng):
        ds = toy_dataset(rng, n_per=3)
        with pytest.raises(ValueError, match="at least 15"):
            nested_cv(ds, GNB_GRID, outer=5, inner=2, seed=0)


class TestGaussianNBOracle:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_sklearn(self, seed):
        gen = np.random.default_rng(seed)
        X = gen.standard_normal((60, 8))
        y = gen.integers(0, 3, size=60)
        y[:3] = [0, 1, 2]
        Xq = gen.standard_normal((40, 8))
        mine = GaussianNB(var_smoothing=1e-9).fit(X, y)
        theirs = SkGaussianNB(var_smoothing=1e-9).fit(X, y)
        np.testing.assert_array_equal(mine.predict(Xq), theirs.predict(Xq))

    def test_rejects_degenerate_training(self):
        with pytest.raises(ValueError):
            GaussianNB().fit(np.zeros((3, 2)), np.array([1, 1, 1]))
        with pytest.raises(ValueError):
            GaussianNB(var_smoothing=-1.0)


class TestKNearestOracle:
    @pytest.mark.parametrize("k", [1, 3, 5])
    def test_matches_sklearn_binary(self, k):
        gen = np.random.default_rng(3)
        X = gen.standard_normal((50, 4))
        y = (gen.random(50) < 0.5).astype(int)
        y[:2] = [0, 1]
        Xq = gen.standard_normal((30, 4))
        mine = KNearest(k=k).fit(X, y)
        theirs = KNeighborsClassifier(n_neighbors=k).fit(X, y)
        np.testing.assert_array_equal(mine.predict(Xq), theirs.predict(Xq))

    def test_nearest_neighbor_memorizes(self, rng):
        X, y = blobs(rng, [[-2, 0], [2, 0], [0, 2]], 10)
        clf = KNearest(k=1).fit(X, y)
        np.testing.assert_array_equal(clf.predict(X), y)

    def test_k_cannot_exceed_training_size(self):
        with pytest.raises(ValueError, match="k exceeds"):
            KNearest(k=5).fit(np.zeros((3, 2)), np.array([0, 1, 0]))


class TestRandomForestBehavior:
    def test_separable_blobs(self, rng):
        X, y = blobs(rng, [[-3, 0], [3, 0], [0, 3]], 20, spread=0.4)
        Xq, yq = blobs(rng, [[-3, 0], [3, 0], [0, 3]], 10, spread=0.4)
        clf = RandomForest(trees=50, seed=0).fit(X, y)
        assert accuracy(clf.predict(X), y) == 1.0
        assert accuracy(clf.predict(Xq), yq) >= 0.9

    def test_deterministic_given_seed(self, rng):
        X, y = blobs(rng, [[-1, 0], [1, 0]], 15, spread=0.8)
        Xq = rng.standard_normal((25, 2))
        a = RandomForest(trees=30, seed=9).fit(X, y).predict(Xq)
        b = RandomForest(trees=30, seed=9).fit(X, y).predict(Xq)
        np.testing.assert_array_equal(a, b)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            RandomForest(trees=0)
        with pytest.raises(ValueError):
            RandomForest(max_depth=0)
        with pytest.raises(ValueError, match="out of range"):
            RandomForest(max_features=5).fit(np.zeros((4, 2)), np.array([0, 1, 0, 1]))


class TestSupportVectorMachineOracle:
    def test_matches_sklearn_when_separable(self, rng):
        X, y = blobs(rng, [[-3, 0], [3, 0], [0, 3]], 15, spread=0.4)
        Xq, yq = blobs(rng, [[-3, 0], [3, 0], [0, 3]], 8, spread=0.4)
        mine = SupportVectorMachine(C=10.0, kernel="rbf", gamma="scale", seed=0).fit(X, y)
        theirs = SVC(C=10.0, kernel="rbf", gamma="scale").fit(X, y)
        assert accuracy(mine.predict(Xq), yq) == 1.0
        np.testing.assert_array_equal(mine.predict(Xq), theirs.predict(Xq))

    def test_scale_gamma_formula(self, rng):
        X, y = blobs(rng, [[-2, 0, 1], [2, 0, -1]], 12)
        clf = SupportVectorMachine(gamma="scale").fit(X, y)
        assert clf.gamma_ == pytest.approx(1.0 / (X.shape[1] * X.var()))

    def test_rbf_solves_what_linear_cannot(self, rng):
        # XOR layout: linear kernel is near chance, rbf separates
        centers = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        X = np.vstack([c + 0.1 * rng.standard_normal((15, 2)) for c in centers])
        y = np.array([0] * 30 + [1] * 30)
        rbf = SupportVectorMachine(C=10.0, kernel="rbf", gamma=2.0, seed=0).fit(X, y)
        lin = SupportVectorMachine(C=10.0, kernel="linear", seed=0).fit(X, y)
        assert accuracy(rbf.predict(X), y) >= 0.9
        assert accuracy(lin.predict(X), y) <= 0.75

    def test_decision_values_shape_and_argmax(self, rng):
        X, y = blobs(rng, [[-3, 0], [3, 0], [0, 3]], 10, spread=0.4)
        clf = SupportVectorMachine(C=5.0, kernel="rbf", gamma=1.0, seed=0).fit(X, y)
        scores = clf.decision_values(X)
        assert scores.shape == (30, 3)
        np.testing.assert_array_equal(np.argmax(scores, axis=1), clf.predict(X))

    def test_deterministic_given_seed(self, rng):
        X, y = blobs(rng, [[-1, 0], [1, 0]], 15, spread=0.8)
        a = SupportVectorMachine(C=1.0, kernel="rbf", gamma=0.5, seed=3).fit(X, y)
        b = SupportVectorMachine(C=1.0, kernel="rbf", gamma=0.5, seed=3).fit(X, y)
        np.testing.assert_array_equal(a.decision_values(X), b.decision_values(X))

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            SupportVectorMachine(C=0.0)
        with pytest.raises(ValueError):
            SupportVectorMachine(kernel="poly")
        with pytest.raises(ValueError):
            SupportVectorMachine(gamma=-1.0)
        with pytest.raises(ValueError):
            SupportVectorMachine().fit(np.zeros((3, 2)), np.array([0, 0, 0]))


def training_table(rng):
    """3 groups x 4 weeks; feature A tracks the group, B is noise."""
    offsets = {"G1": 2.0, "G2": 0.0, "G3": -2.0}
    values = {
        (g, w): {
            "A": offsets[g] + 0.2 * rng.standard_normal(),
            "B": rng.standard_normal(),
        }
        for g in offsets
        for w in (1, 2, 3, 4)
    }
    return make_table(values, simple_marks({"G1": 90.0, "G2": 70.0, "G3": 50.0}))


class TestTrainedModel:
    def fit_model(self, rng, **kw):
        table = training_table(rng)
        ds, imp = dataset_from_table(table, ["A", "B"])
        model = train_model(
            ds, imp, GNB_GRID, seed=3, inner=2, use_projection=False, **kw
        )
        return table, model

    def test_predict_table_learns_signal(self, rng):
        table, model = self.fit_model(rng)
        pred = model.predict_table(table)
        truth = {(r.group_id, r.week): r.label for r in table.rows}
        agree = np.mean([pred[k] == truth[k] for k in truth])
        assert agree >= 0.9

    def test_save_load_round_trip(self, rng, tmp_path):
        table, model = self.fit_model(rng)
        path = tmp_path / "model.json"
        model.save(path, digest="abc123")
        loaded = TrainedModel.load(path, expected_digest="abc123")
        assert loaded.hyperparams == model.hyperparams
        assert loaded.feature_names == model.feature_names
        assert loaded.predict_table(table) == model.predict_table(table)

    def test_digest_mismatch_rejected(self, rng, tmp_path):
        _, model = self.fit_model(rng)
        path = tmp_path / "model.json"
        model.save(path, digest="abc123")
        with pytest.raises(ValueError, match="digest"):
            TrainedModel.load(path, expected_digest="other")
        TrainedModel.load(path)

    def test_unknown_format_version_rejected(self, rng, tmp_path):
        _, model = self.fit_model(rng)
        path = tmp_path / "model.json"
        model.save(path)
        raw = json.loads(path.read_text())
        raw["format_version"] = 99
        path.write_text(json.dumps(raw))
        with pytest.raises(ValueError, match="format"):
            TrainedModel.load(path)

    def test_projection_round_trip(self, rng, tmp_path):
        table = training_table(rng)
        ds, imp = dataset_from_table(table, ["A", "B"])
        model = train_model(ds, imp, GNB_GRID, seed=3, inner=2, d_out=1)
        assert model.projection is not None and model.projection.d_out == 1
        path = tmp_path / "model.json"
        model.save(path)
        loaded = TrainedModel.load(path)
        np.testing.assert_array_equal(
            loaded.projection.matrix, model.projection.matrix
        )
        assert loaded.predict_table(table) == model.predict_table(table)

    def test_predict_table_imputes_missing_cells(self, rng):
        table, model = self.fit_model(rng)
        sparse = make_table({("G9", 1): {"A": 2.0}})
        pred = model.predict_table(sparse)
        assert set(pred) == {("G9", 1)}
        assert pred[("G9", 1)] in CLASS_LABELS

    def test_evaluate_model_single_fold(self, rng):
        table, model = self.fit_model(rng)
        res = evaluate_model(model, table)
        assert len(res.folds) == 1
        assert res.folds[0].n_test == 12
        assert math.isnan(res.folds[0].inner_mean_accuracy)
        assert res.pooled_accuracy == res.mean_accuracy
        assert res.confusion.sum() == 12

    def test_evaluate_model_requires_labels(self, rng):
        _, model = self.fit_model(rng)
        with pytest.raises(ValueError, match="label"):
            evaluate_model(model, make_table({("G1", 1): {"A": 0.0, "B": 0.0}}))

    def test_evaluation_json_shape(self, rng):
        table, model = self.fit_model(rng)
        res = evaluate_model(model, table)
        doc = json.loads(evaluation_json(res, digest="d1"))
        assert doc["config_digest"] == "d1"
        assert doc["folds"][0]["inner_mean_accuracy"] is None
        assert doc["class_order"] == ["High", "Mid", "Low"]
        assert np.trace(np.array(doc["confusion"])) / 12 == doc["pooled_accuracy"]
