"""Outcome prediction from screened group features.

Selected features become a dense matrix (absent cells filled with
per-week medians), get randomly projected at the 45/62 ratio, and feed
classifiers tuned by nested stratified cross-validation: inner folds
pick hyperparameters, outer folds measure accuracy. Every random
choice draws from a seed derived from the master seed and the work
item, so results are identical under any execution order.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence, Union

import numpy as np

from .classifiers import GaussianNB, KNearest, RandomForest, SupportVectorMachine
from .grouping import GroupFeatureTable, OutcomeLabel

PROJECTION_RATIO = 45.0 / 62.0
CLASS_LABELS = (OutcomeLabel.HIGH, OutcomeLabel.MID, OutcomeLabel.LOW)
MODEL_FORMAT_VERSION = 1


def derive_seed(master: int, *parts: object) -> int:
    """Stable per-work-item seed from the master seed and item identity."""
    h = hashlib.sha256(str(int(master)).encode())
    for part in parts:
        h.update(b"|")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "big")


@dataclass(frozen=True)
class Imputation:
    """Medians used to fill absent cells, for provenance and reuse."""

    global_medians: Mapping[str, float]
    week_medians: Mapping[str, Mapping[int, float]]
    filled: int

    def value_for(self, feature: str, week: int) -> float:
        weeks = self.week_medians.get(feature, {})
        if week in weeks:
            return weeks[week]
        return self.global_medians[feature]


@dataclass(frozen=True)
class Dataset:
    """Complete feature matrix with integer class labels.

    Class indices follow CLASS_LABELS order (High 0, Mid 1, Low 2).
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    keys: tuple[tuple[str, int], ...]
    n_classes: int = len(CLASS_LABELS)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.intp)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size or len(self.keys) != y.size:
            raise ValueError("matrix, labels, and keys must agree on row count")
        if not np.all(np.isfinite(X)):
            raise ValueError("dataset must not contain absent or non-finite values")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise ValueError("label out of class range")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    def with_labels(self, y: np.ndarray) -> "Dataset":
        return Dataset(self.X, y, self.feature_names, self.keys, self.n_classes)


def dataset_from_table(
    table: GroupFeatureTable, features: Sequence[str]
) -> tuple[Dataset, Imputation]:
    """Assemble the prediction matrix from selected table columns.

    Absent cells take the feature's median within the row's week,
    falling back to the feature's global median. Every row must carry
    a label; every feature must be present somewhere.
    """
    if not features:
        raise ValueError("no features selected")
    if any(r.label is None for r in table.rows):
        raise ValueError("every row needs an outcome label")
    rows = table.rows
    global_medians: dict[str, float] = {}
    week_medians: dict[str, dict[int, float]] = {}
    for f in features:
        vals = [r.values[f] for r in rows if f in r.values]
        if not vals:
            raise ValueError(f"feature {f} has no values anywhere")
        global_medians[f] = float(np.median(vals))
        week_medians[f] = {}
        for week in table.weeks():
            wv = [r.values[f] for r in rows if r.week == week and f in r.values]
            if wv:
                week_medians[f][week] = float(np.median(wv))

    imp = Imputation(global_medians, week_medians, 0)
    filled = 0
    X = np.empty((len(rows), len(features)))
    for i, r in enumerate(rows):
        for j, f in enumerate(features):
            if f in r.values:
                X[i, j] = r.values[f]
            else:
                X[i, j] = imp.value_for(f, r.week)
                filled += 1
    y = np.array([CLASS_LABELS.index(r.label) for r in rows], dtype=np.intp)
    keys = tuple((r.group_id, r.week) for r in rows)
    return Dataset(X, y, tuple(features), keys), Imputation(
        global_medians, week_medians, filled
    )


def default_output_dim(d_in: int) -> int:
    """Projected width at the 45/62 ratio, clipped to [1, d_in]."""
    return min(d_in, max(1, round(PROJECTION_RATIO * d_in)))


@dataclass(frozen=True)
class RandomProjection:
    """Seeded Gaussian projection matrix, entries N(0, 1/d_out)."""

    seed: int
    d_in: int
    d_out: int
    matrix: np.ndarray

    @classmethod
    def fit(cls, d_in: int, seed: int, d_out: int | None = None) -> "RandomProjection":
        if d_out is None:
            d_out = default_output_dim(d_in)
        if not 1 <= d_out <= d_in:
            raise ValueError("need 1 <= d_out <= d_in")
        rng = np.random.default_rng(seed)
        matrix = rng.normal(0.0, math.sqrt(1.0 / d_out), size=(d_out, d_in))
        return cls(seed, d_in, d_out, matrix)

    def project(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        one = X.ndim == 1
        if one:
            X = X[None, :]
        if X.shape[1] != self.d_in:
            raise ValueError(f"expected {self.d_in} columns, got {X.shape[1]}")
        out = X @ self.matrix.T
        return out[0] if one else out


_KINDS = ("svm", "gnb", "knn", "rf")


@dataclass(frozen=True)
class HyperParams:
    """One classifier kind plus its named parameter values."""

    kind: str
    values: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        object.__setattr__(self, "values", tuple(sorted(dict(self.values).items())))
        p = self.params()
        if self.kind == "svm":
            if p.get("C", 1.0) <= 0:
                raise ValueError("C must be positive")
            if p.get("kernel", "linear") not in ("linear", "rbf"):
                raise ValueError("kernel must be linear or rbf")
            g = p.get("gamma", "scale")
            if not (g == "scale" or (isinstance(g, (int, float)) and g > 0)):
                raise ValueError("gamma must be positive or 'scale'")
        elif self.kind == "knn":
            if int(p.get("k", 5)) < 1:
                raise ValueError("k must be >= 1")
        elif self.kind == "rf":
            if int(p.get("trees", 100)) < 1:
                raise ValueError("trees must be >= 1")
            depth = p.get("max_depth")
            if depth is not None and int(depth) < 1:
                raise ValueError("max depth must be >= 1 or None")
        elif self.kind == "gnb":
            if p.get("var_smoothing", 1e-9) < 0:
                raise ValueError("variance smoothing must be >= 0")

    @classmethod
    def of(cls, kind: str, **values: object) -> "HyperParams":
        return cls(kind, tuple(values.items()))

    def params(self) -> dict[str, object]:
        return dict(self.values)


def make_classifier(hp: HyperParams, seed: int):
    p = hp.params()
    if hp.kind == "svm":
        return SupportVectorMachine(
            C=float(p.get("C", 1.0)),
            kernel=str(p.get("kernel", "linear")),
            gamma=p.get("gamma", "scale"),
            seed=seed,
        )
    if hp.kind == "gnb":
        return GaussianNB(var_smoothing=float(p.get("var_smoothing", 1e-9)))
    if hp.kind == "knn":
        return KNearest(k=int(p.get("k", 5)), metric=str(p.get("metric", "euclidean")))
    if hp.kind == "rf":
        depth = p.get("max_depth")
        return RandomForest(
            trees=int(p.get("trees", 100)),
            max_depth=None if depth is None else int(depth),
            max_features=p.get("max_features", "sqrt"),
            seed=seed,
        )
    raise ValueError(f"unknown classifier kind {hp.kind!r}")


class SearchStrategy(Protocol):
    def candidates(self, seed: int) -> list[HyperParams]: ...


@dataclass(frozen=True)
class GridSearch:
    """A fixed candidate list, emitted in declaration order."""

    space: tuple[HyperParams, ...]

    def __post_init__(self):
        if not self.space:
            raise ValueError("empty candidate space")

    def candidates(self, seed: int) -> list[HyperParams]:
        return list(self.space)


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValueError("need 0 < lo < hi")

    def draw(self, rng: np.random.Generator):
        return float(np.exp(rng.uniform(np.log(self.lo), np.log(self.hi))))


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")

    def draw(self, rng: np.random.Generator):
        return float(rng.uniform(self.lo, self.hi))


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError("need lo <= hi")

    def draw(self, rng: np.random.Generator):
        return int(rng.integers(self.lo, self.hi + 1))


@dataclass(frozen=True)
class Choice:
    options: tuple[object, ...]

    def __post_init__(self):
        if not self.options:
            raise ValueError("empty choice")

    def draw(self, rng: np.random.Generator):
        return self.options[int(rng.integers(len(self.options)))]


@dataclass(frozen=True)
class RandomSearch:
    """Seeded draws from per-parameter ranges, in declaration order."""

    kind: str
    n_draws: int
    ranges: tuple[tuple[str, object], ...]

    def __post_init__(self):
        if self.n_draws < 1:
            raise ValueError("need at least one draw")
        if not self.ranges:
            raise ValueError("empty candidate space")

    def candidates(self, seed: int) -> list[HyperParams]:
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(self.n_draws):
            values = tuple((name, dist.draw(rng)) for name, dist in self.ranges)
            out.append(HyperParams(self.kind, values))
        return out


def default_search(kind: str, spec: str = "random:30") -> SearchStrategy:
    """Build the stock search space for a classifier kind.

    spec is "grid" or "random:<draws>".
    """
    if spec == "grid":
        if kind == "svm":
            return GridSearch(
                tuple(
                    HyperParams.of("svm", C=c, kernel=k, gamma="scale")
                    for c in (0.1, 1.0, 10.0)
                    for k in ("linear", "rbf")
                )
            )
        if kind == "knn":
            return GridSearch(tuple(HyperParams.of("knn", k=k) for k in (1, 3, 5, 7)))
        if kind == "rf":
            return GridSearch(
                tuple(
                    HyperParams.of("rf", trees=50, max_depth=d) for d in (None, 3, 10)
                )
            )
        if kind == "gnb":
            return GridSearch((HyperParams.of("gnb", var_smoothing=1e-9),))
        raise ValueError(f"unknown classifier kind {kind!r}")
    if spec.startswith("random:"):
        draws = int(spec.split(":", 1)[1])
        if kind == "svm":
            # ranges sized for weekly-normalized features in [-1, 1],
            # where the scale heuristic for gamma sits near 1/d
            return RandomSearch(
                "svm",
                draws,
                (
                    ("C", LogUniform(1e-1, 1e2)),
                    ("gamma", LogUniform(1e-2, 2.0)),
                    ("kernel", Choice(("linear", "rbf"))),
                ),
            )
        if kind == "knn":
            return RandomSearch("knn", draws, (("k", IntRange(1, 15)),))
        if kind == "rf":
            return RandomSearch(
                "rf",
                draws,
                (
                    ("trees", IntRange(20, 100)),
                    ("max_depth", Choice((None, 3, 5, 10))),
                ),
            )
        if kind == "gnb":
            return RandomSearch(
                "gnb", draws, (("var_smoothing", LogUniform(1e-12, 1e-6)),)
            )
        raise ValueError(f"unknown classifier kind {kind!r}")
    raise ValueError(f"malformed search spec {spec!r}; use 'grid' or 'random:<n>'")


def accuracy(predictions: Sequence[int], truth: Sequence[int]) -> float:
    """Fraction of predictions matching the ground-truth labels."""
    pred = np.asarray(predictions)
    true = np.asarray(truth)
    if pred.shape != true.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError("predictions and truth must be equal-length and non-empty")
    return float(np.mean(pred == true))


def confusion_matrix(truth: Sequence[int], predictions: Sequence[int], n_classes: int) -> np.ndarray:
    """Counts with rows = truth, columns = prediction."""
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(truth, predictions):
        m[int(t), int(p)] += 1
    return m


def stratified_folds(y: np.ndarray, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Split indices into k folds preserving class proportions.

    Raises when any class would be absent from some fold.
    """
    y = np.asarray(y)
    folds: list[list[int]] = [[] for _ in range(k)]
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        rng.shuffle(idx)
        for f in range(k):
            folds[f].extend(idx[f::k].tolist())
    for f, members in enumerate(folds):
        present = set(int(y[i]) for i in members)
        missing = [int(c) for c in np.unique(y) if int(c) not in present]
        if missing:
            raise ValueError(f"fold {f} is missing class(es) {missing} under stratification")
    return [np.array(sorted(members), dtype=np.intp) for members in folds]


AugmentFn = Callable[
    [np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.random.Generator],
    tuple[np.ndarray, np.ndarray],
]


@dataclass(frozen=True)
class FoldResult:
    fold: int
    chosen: HyperParams
    inner_mean_accuracy: float
    test_accuracy: float
    n_test: int


@dataclass(frozen=True)
class EvaluationResult:
    """Nested cross-validation outcome.

    mean_accuracy averages the per-fold accuracies; pooled_accuracy is
    total matches over total predictions, and equals the confusion
    matrix trace divided by its sum.
    """

    folds: tuple[FoldResult, ...]
    confusion: np.ndarray
    seed: int

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([f.test_accuracy for f in self.folds]))

    @property
    def pooled_accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.confusion.sum())


def _score_candidate(
    X_tr, y_tr, hp, inner_folds, seed, outer_index, cand_index, use_projection, d_out
) -> float:
    accs = []
    for g, val_idx in enumerate(inner_folds):
        train_idx = np.setdiff1d(np.arange(y_tr.size), val_idx)
        X_a, y_a = X_tr[train_idx], y_tr[train_idx]
        X_b, y_b = X_tr[val_idx], y_tr[val_idx]
        if use_projection:
            rp = RandomProjection.fit(
                X_a.shape[1], derive_seed(seed, "rp", outer_index, g), d_out
            )
            X_a, X_b = rp.project(X_a), rp.project(X_b)
        clf = make_classifier(hp, derive_seed(seed, "clf", outer_index, g, cand_index))
        clf.fit(X_a, y_a)
        accs.append(accuracy(clf.predict(X_b), y_b))
    return float(np.mean(accs))


def nested_cv(
    dataset: Dataset,
    search: SearchStrategy,
    outer: int = 5,
    inner: int = 5,
    seed: int = 0,
    augment: AugmentFn | None = None,
    use_projection: bool = True,
    d_out: int | None = None,
) -> EvaluationResult:
    """Stratified nested cross-validation with per-fold tuning.

    Outer folds hold out test sessions at 4:1; inner folds over each
    training set score every candidate by mean validation accuracy, and
    the best (ties to the earliest candidate) retrains on the whole
    training fold. The optional `augment` hook may append columns to
    the train/test matrices per outer fold (used by the leakage canary)
    and runs before projection. Everything is derived-seed
    deterministic; test folds never influence training-side choices.
    """
    if dataset.n < outer * dataset.n_classes:
        raise ValueError(
            f"need at least {outer * dataset.n_classes} rows for {outer} stratified folds"
        )
    candidates = search.candidates(derive_seed(seed, "search"))
    if not candidates:
        raise ValueError("search produced no candidates")
    outer_folds = stratified_folds(
        dataset.y, outer, np.random.default_rng(derive_seed(seed, "outer"))
    )
    folds = []
    confusion = np.zeros((dataset.n_classes, dataset.n_classes), dtype=np.int64)
    for f, test_idx in enumerate(outer_folds):
        train_idx = np.setdiff1d(np.arange(dataset.n), test_idx)
        X_tr, y_tr = dataset.X[train_idx], dataset.y[train_idx]
        X_te, y_te = dataset.X[test_idx], dataset.y[test_idx]
        if augment is not None:
            X_tr, X_te = augment(
                X_tr,
                y_tr,
                X_te,
                y_te,
                np.random.default_rng(derive_seed(seed, "augment", f)),
            )
        inner_folds = stratified_folds(
            y_tr, inner, np.random.default_rng(derive_seed(seed, "inner", f))
        )
        scores = [
            _score_candidate(
                X_tr, y_tr, hp, inner_folds, seed, f, c, use_projection, d_out
            )
            for c, hp in enumerate(candidates)
        ]
        best_index = int(np.argmax(scores))
        chosen = candidates[best_index]
        if use_projection:
            rp = RandomProjection.fit(X_tr.shape[1], derive_seed(seed, "rp", f), d_out)
            X_fit, X_eval = rp.project(X_tr), rp.project(X_te)
        else:
            X_fit, X_eval = X_tr, X_te
        clf = make_classifier(chosen, derive_seed(seed, "clf", f, best_index))
        clf.fit(X_fit, y_tr)
        pred = clf.predict(X_eval)
        confusion += confusion_matrix(y_te, pred, dataset.n_classes)
        folds.append(
            FoldResult(f, chosen, scores[best_index], accuracy(pred, y_te), int(y_te.size))
        )
    return EvaluationResult(tuple(folds), confusion, seed)


def evaluation_json(result: EvaluationResult, digest: str | None = None) -> str:
    payload = {
        "config_digest": digest,
        "seed": result.seed,
        "mean_accuracy": result.mean_accuracy,
        "pooled_accuracy": result.pooled_accuracy,
        "confusion": result.confusion.tolist(),
        "class_order": [lab.value for lab in CLASS_LABELS],
        "folds": [
            {
                "fold": f.fold,
                "classifier": f.chosen.kind,
                "hyperparams": f.chosen.params(),
                "inner_mean_accuracy": None
                if math.isnan(f.inner_mean_accuracy)
                else f.inner_mean_accuracy,
                "test_accuracy": f.test_accuracy,
                "n_test": f.n_test,
            }
            for f in result.folds
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


@dataclass(frozen=True)
class TrainedModel:
    """A fitted classifier plus everything needed to apply it again.

    Persisted as a versioned JSON container holding the projection
    matrix, imputation medians, hyperparameters, and the training data;
    loading refits the (deterministic) classifier from those.
    """

    hyperparams: HyperParams
    seed: int
    feature_names: tuple[str, ...]
    projection: RandomProjection | None
    imputation: Imputation
    X_train: np.ndarray
    y_train: np.ndarray
    classifier: object = field(compare=False, repr=False, default=None)

    def classify(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.projection is not None:
            X = self.projection.project(X)
        return self.classifier.predict(X)

    def predict_table(self, table: GroupFeatureTable) -> dict[tuple[str, int], OutcomeLabel]:
        """Label each (group, week) row, imputing with stored medians."""
        X = np.empty((len(table.rows), len(self.feature_names)))
        for i, r in enumerate(table.rows):
            for j, f in enumerate(self.feature_names):
                X[i, j] = r.values[f] if f in r.values else self.imputation.value_for(f, r.week)
        pred = self.classify(X)
        return {
            (r.group_id, r.week): CLASS_LABELS[int(p)] for r, p in zip(table.rows, pred)
        }

    def save(self, path: Union[str, Path], digest: str | None = None) -> None:
        payload = {
            "format_version": MODEL_FORMAT_VERSION,
            "config_digest": digest,
            "classifier": self.hyperparams.kind,
            "hyperparams": self.hyperparams.params(),
            "seed": self.seed,
            "feature_names": list(self.feature_names),
            "projection": None
            if self.projection is None
            else {
                "seed": self.projection.seed,
                "d_in": self.projection.d_in,
                "d_out": self.projection.d_out,
                "matrix": self.projection.matrix.tolist(),
            },
            "imputation": {
                "global": dict(self.imputation.global_medians),
                "weeks": {
                    f: {str(w): v for w, v in weeks.items()}
                    for f, weeks in self.imputation.week_medians.items()
                },
                "filled": self.imputation.filled,
            },
            "X_train": self.X_train.tolist(),
            "y_train": self.y_train.tolist(),
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True), "utf-8")

    @classmethod
    def load(cls, path: Union[str, Path], expected_digest: str | None = None) -> "TrainedModel":
        raw = json.loads(Path(path).read_text("utf-8"))
        if raw.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {raw.get('format_version')!r}")
        if expected_digest is not None and raw.get("config_digest") != expected_digest:
            raise ValueError(
                f"config digest mismatch: model has {raw.get('config_digest')!r}, "
                f"expected {expected_digest!r}"
            )
        hp = HyperParams(raw["classifier"], tuple(raw["hyperparams"].items()))
        projection = None
        if raw["projection"] is not None:
            p = raw["projection"]
            projection = RandomProjection(
                int(p["seed"]), int(p["d_in"]), int(p["d_out"]), np.array(p["matrix"])
            )
        imputation = Imputation(
            {k: float(v) for k, v in raw["imputation"]["global"].items()},
            {
                f: {int(w): float(v) for w, v in weeks.items()}
                for f, weeks in raw["imputation"]["weeks"].items()
            },
            int(raw["imputation"]["filled"]),
        )
        X_train = np.array(raw["X_train"], dtype=np.float64)
        y_train = np.array(raw["y_train"], dtype=np.intp)
        seed = int(raw["seed"])
        clf = make_classifier(hp, derive_seed(seed, "final")).fit(X_train, y_train)
        return cls(
            hp, seed, tuple(raw["feature_names"]), projection, imputation,
            X_train, y_train, classifier=clf,
        )


def train_model(
    dataset: Dataset,
    imputation: Imputation,
    search: SearchStrategy,
    seed: int = 0,
    inner: int = 5,
    use_projection: bool = True,
    d_out: int | None = None,
) -> TrainedModel:
    """Pick hyperparameters by stratified CV on all data, then fit on all.

    The returned model carries the projection and imputation medians so
    it can be applied to feature tables as-is.
    """
    candidates = search.candidates(derive_seed(seed, "search"))
    inner_folds = stratified_folds(
        dataset.y, inner, np.random.default_rng(derive_seed(seed, "inner", "final"))
    )
    scores = [
        _score_candidate(
            dataset.X, dataset.y, hp, inner_folds, seed, "final", c, use_projection, d_out
        )
        for c, hp in enumerate(candidates)
    ]
    chosen = candidates[int(np.argmax(scores))]
    projection = None
    X = dataset.X
    if use_projection:
        projection = RandomProjection.fit(dataset.d, derive_seed(seed, "rp", "final"), d_out)
        X = projection.project(X)
    clf = make_classifier(chosen, derive_seed(seed, "final")).fit(X, dataset.y)
    return TrainedModel(
        chosen, seed, dataset.feature_names, projection, imputation,
        X, dataset.y, classifier=clf,
    )


def evaluate_model(model: TrainedModel, table: GroupFeatureTable) -> EvaluationResult:
    """Apply a trained model to a labeled table, as a single-fold result."""
    if any(r.label is None for r in table.rows):
        raise ValueError("every row needs an outcome label")
    pred_map = model.predict_table(table)
    truth = [CLASS_LABELS.index(r.label) for r in table.rows]
    pred = [CLASS_LABELS.index(pred_map[(r.group_id, r.week)]) for r in table.rows]
    acc = accuracy(pred, truth)
    confusion = confusion_matrix(truth, pred, len(CLASS_LABELS))
    fold = FoldResult(0, model.hyperparams, math.nan, acc, len(truth))
    return EvaluationResult((fold,), confusion, model.seed)
