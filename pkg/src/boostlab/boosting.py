"""Losses, the additive training loop, prediction, and model persistence.

An Ensemble's raw score is base_score + learning_rate * sum(tree outputs);
the logistic loss additionally exposes sigmoid(raw) as a probability. Training
is fully deterministic given (dataset, config): per-iteration randomness is
derived from (config.seed, iteration).
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, asdict, field, replace

import numpy as np

from . import growers, strategies
from .dataset import (CATEGORICAL, Dataset, DatasetError, bin_features,
                      one_hot_encode)

LOSSES = ("squared_error", "logistic")
GROWERS = ("level_wise", "leaf_wise", "oblivious")

RAW_SCORE_CLIP = 30.0  # logistic raw scores are clipped here before sigmoid


class ConfigError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LossSpec:
    """Which differentiable convex loss drives the gradients."""

    kind: str = "squared_error"

    def __post_init__(self):
        if self.kind not in LOSSES:
            raise ConfigError(f"unknown loss {self.kind!r}; expected one of {LOSSES}")


def _loss_kind(loss) -> str:
    return loss.kind if isinstance(loss, LossSpec) else LossSpec(loss).kind


def sigmoid(raw: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(raw, -RAW_SCORE_CLIP, RAW_SCORE_CLIP)))


def compute_gradients(loss, targets: np.ndarray, predictions: np.ndarray):
    """First and second derivatives of the loss at the current raw scores.

    squared_error l = (pred-y)^2/2: g = pred - y, h = 1.
    logistic l = -[y ln p + (1-y) ln(1-p)], p = sigmoid(pred): g = p - y,
    h = p(1-p). Targets for logistic must be 0 or 1.
    """
    kind = _loss_kind(loss)
    targets = np.asarray(targets, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    if len(targets) != len(predictions):
        raise ValueError("targets and predictions differ in length")
    if kind == "squared_error":
        return predictions - targets, np.ones_like(targets)
    bad = ~np.isin(targets, (0.0, 1.0))
    if bad.any():
        raise ValueError(
            f"logistic loss needs targets in {{0,1}}; found {targets[bad][0]} "
            f"at row {int(np.flatnonzero(bad)[0])}")
    p = sigmoid(predictions)
    return p - targets, p * (1.0 - p)


def loss_value(loss, targets: np.ndarray, predictions: np.ndarray) -> float:
    """Mean training loss (used by the monotonicity checks and reports)."""
    kind = _loss_kind(loss)
    if kind == "squared_error":
        return float(np.mean((predictions - targets) ** 2) / 2.0)
    p = sigmoid(predictions)
    p = np.clip(p, 1e-15, 1.0 - 1e-15)
    return float(-np.mean(targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p)))


def init_base_score(loss, targets: np.ndarray) -> float:
    """Mean for squared error, clipped log-odds for logistic."""
    if len(targets) == 0:
        raise ValueError("empty targets")
    kind = _loss_kind(loss)
    if kind == "squared_error":
        return float(np.mean(targets))
    p = float(np.clip(np.mean(targets), 1e-6, 1.0 - 1e-6))
    return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class BoostConfig:
    """All training knobs. goss_* needs the leaf_wise grower, ordered_blocks
    the oblivious one; max_leaves=None means 2**max_depth."""

    n_trees: int = 100
    learning_rate: float = 0.1
    lambda_: float = 1.0
    gamma: float = 0.0
    max_depth: int = 6
    max_leaves: int | None = None
    min_child_hessian: float = 1.0
    max_bins: int = 256
    grower: str = "level_wise"
    loss: str = "squared_error"
    goss_a: float | None = None
    goss_b: float | None = None
    efb_max_conflicts: int | None = None
    ordered_blocks: int | None = None
    ordered_permutations: int = 1
    zero_base_score: bool = False
    seed: int = 0

    def validate(self) -> None:
        if self.n_trees < 0:
            raise ConfigError("n_trees must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must be in (0, 1]")
        if self.lambda_ < 0 or self.gamma < 0:
            raise ConfigError("lambda_ and gamma must be >= 0")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.max_leaves is not None and self.max_leaves < 2:
            raise ConfigError("max_leaves must be >= 2")
        if self.min_child_hessian < 0:
            raise ConfigError("min_child_hessian must be >= 0")
        if self.max_bins < 2:
            raise ConfigError("max_bins must be >= 2")
        if self.grower not in GROWERS:
            raise ConfigError(f"unknown grower {self.grower!r}")
        LossSpec(self.loss)
        if (self.goss_a is None) != (self.goss_b is None):
            raise ConfigError("goss_a and goss_b must be set together")
        if self.goss_a is not None:
            if self.grower != "leaf_wise":
                raise ConfigError("goss requires grower='leaf_wise'")
            if not 0.0 < self.goss_a <= 1.0 or self.goss_b < 0.0:
                raise ConfigError("need 0 < goss_a <= 1 and goss_b >= 0")
            if self.goss_a + self.goss_b > 1.0:
                raise ConfigError("goss_a + goss_b must be <= 1")
        if self.ordered_blocks is not None:
            if self.grower != "oblivious":
                raise ConfigError("ordered boosting requires grower='oblivious'")
            if self.ordered_blocks < 1:
                raise ConfigError("ordered_blocks must be >= 1")
        if self.ordered_permutations < 1:
            raise ConfigError("ordered_permutations must be >= 1")


@dataclass
class Ensemble:
    """A trained additive model over numeric (possibly one-hot derived) features."""

    trees: list
    base_score: float
    learning_rate: float
    loss: str
    feature_names: list[str]
    categorical_levels: dict[str, list[str]] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def feature_matrix(self, data) -> np.ndarray:
        """Rows x features float matrix in feature_names order.

        Datasets may carry the original categorical columns; they are expanded
        with the training-time label tables (unseen labels give all-zero
        indicators). Missing feature columns raise.
        """
        if isinstance(data, np.ndarray):
            if data.ndim != 2 or data.shape[1] != len(self.feature_names):
                raise ValueError(f"expected matrix with {len(self.feature_names)} columns")
            return data.astype(np.float64, copy=False)
        cols = []
        for name in self.feature_names:
            if name in data.columns and data.schema_for(name).kind != CATEGORICAL:
                cols.append(np.asarray(data.column(name), dtype=np.float64))
                continue
            src, _, label = name.partition("=")
            if label and src in self.categorical_levels and src in data.columns:
                decoded = data.decoded(src)
                cols.append((decoded == label).astype(np.float64))
                continue
            raise DatasetError(f"prediction data is missing feature column {name!r}")
        return np.column_stack(cols) if cols else np.empty((data.n_rows, 0))

    def predict(self, data, n_trees: int | None = None) -> np.ndarray:
        """Raw scores base + learning_rate * sum of the first n_trees trees."""
        X = self.feature_matrix(data)
        take = self.trees if n_trees is None else self.trees[:n_trees]
        raw = np.full(len(X), self.base_score)
        for tree in take:
            raw += self.learning_rate * tree.predict_matrix(X)
        return raw

    def predict_proba(self, data, n_trees: int | None = None) -> np.ndarray:
        if self.loss != "logistic":
            raise ValueError("probabilities are only defined for the logistic loss")
        return sigmoid(self.predict(data, n_trees))


def _encode_features(ds: Dataset) -> tuple[Dataset, dict[str, list[str]]]:
    """One-hot every usable categorical feature; drop single-level ones."""
    levels: dict[str, list[str]] = {}
    out = ds
    for c in list(ds.schema):
        if c.kind != CATEGORICAL:
            continue
        if len(ds.labels[c.name]) >= 2:
            levels[c.name] = list(ds.labels[c.name])
            out = one_hot_encode(out, c.name)
        else:
            out = out.select_columns([n for n in out.column_names if n != c.name])
    return out, levels


def _iteration_seed(seed: int, t: int, salt: int = 0):
    return (seed & 0xFFFFFFFF, t, salt)


def _grow_fn(config: BoostConfig):
    if config.grower == "level_wise":
        return growers.grow_level_wise
    if config.grower == "leaf_wise":
        return growers.grow_leaf_wise
    return growers.grow_oblivious


def _tree_scores(tree, X: np.ndarray, trained_on_all: bool) -> np.ndarray:
    """Per-row tree output, reusing the grower's own leaf assignment when the
    tree was fit on every row (oblivious growth records it)."""
    cached = tree.__dict__.pop("_train_leaf_pos", None)
    if cached is not None and trained_on_all and len(cached) == len(X):
        return tree.leaf_weight_vector()[cached]
    return tree.predict_matrix(X)


def train(ds: Dataset, config: BoostConfig) -> Ensemble:
    """Run the additive loop: gradients at current predictions, one new tree
    per iteration through the configured grower and strategies, predictions
    advanced by learning_rate * tree(x)."""
    config.validate()
    tname = ds.target_name()
    if tname is None:
        raise DatasetError("dataset has no target column")
    if ds.n_rows < 2:
        raise DatasetError("need at least 2 rows to train")
    y = np.asarray(ds.columns[tname], dtype=np.float64)
    if np.isnan(y).any():
        raise DatasetError("target column contains missing values")

    feat_ds, levels = _encode_features(ds.select_columns(
        [c.name for c in ds.schema if c.kind != "target"]))
    binned = bin_features(feat_ds, config.max_bins)
    X = np.column_stack([feat_ds.columns[n] for n in binned.feature_names])

    loss = config.loss
    base = 0.0 if config.zero_base_score else init_base_score(loss, y)
    if config.efb_max_conflicts is not None:
        bundles = strategies.efb_bundle(binned, config.efb_max_conflicts)
        hist_fn = strategies.BundledHistograms(binned, bundles)
    else:
        hist_fn = growers.HistogramBuilder(binned)
    grow = _grow_fn(config)

    trees: list = []
    n = ds.n_rows
    all_idx = np.arange(n)
    if config.ordered_blocks is not None:
        trees = _train_ordered(y, binned, X, config, base, hist_fn)
    else:
        preds = np.full(n, base)
        for t in range(config.n_trees):
            g, h = compute_gradients(loss, y, preds)
            idx = all_idx
            if config.goss_a is not None:
                sample = strategies.goss_select(
                    g, config.goss_a, config.goss_b, _iteration_seed(config.seed, t))
                w = sample.weights(n)
                idx = sample.kept
                g = g * w
                h = h * w
            tree = grow(idx, binned, g, h, config, hist_fn=hist_fn)
            trees.append(tree)
            preds += config.learning_rate * _tree_scores(tree, X, len(idx) == n)

    return Ensemble(trees, base, config.learning_rate, loss,
                    list(binned.feature_names), levels, config_dict(config))


def _train_ordered(y, binned, X, config: BoostConfig, base: float, hist_fn) -> list:
    """Ordered boosting: every instance's gradient for the returned trees comes
    from a prefix model that never trained on its own block. Each prefix model
    advances as an ordinary booster on its own prefix (gradients at its own
    predictions), so the prefix predictions converge instead of compounding."""
    n = len(y)
    n_blocks = config.ordered_blocks
    schedule = strategies.ordered_schedule(
        n, config.ordered_permutations, n_blocks, _iteration_seed(config.seed, 0, salt=1))
    grad_fn = functools.partial(compute_gradients, config.loss)
    block_preds = [np.full((n_blocks, n), base) for _ in schedule.permutations]
    prefix_idx = [[schedule.prefix_indices(p, j) for j in range(n_blocks)]
                  for p in range(len(schedule.permutations))]
    all_idx = np.arange(n)
    trees = []
    gj = np.zeros(n)
    hj = np.zeros(n)
    for _ in range(config.n_trees):
        g, h, _ = strategies.ordered_gradients(schedule, grad_fn, y, block_preds)
        tree = growers.grow_oblivious(all_idx, binned, g, h, config, hist_fn=hist_fn)
        tree.__dict__.pop("_train_leaf_pos", None)
        trees.append(tree)
        for p in range(len(schedule.permutations)):
            for j in range(1, n_blocks):
                idx = prefix_idx[p][j]
                gj[idx], hj[idx] = grad_fn(y[idx], block_preds[p][j][idx])
                prefix_tree = growers.grow_oblivious(
                    idx, binned, gj, hj, config, hist_fn=hist_fn)
                prefix_tree.__dict__.pop("_train_leaf_pos", None)
                block_preds[p][j] += config.learning_rate * prefix_tree.predict_matrix(X)
    return trees


def predict(ens: Ensemble, rows, n_trees: int | None = None) -> np.ndarray:
    return ens.predict(rows, n_trees)


@dataclass
class Classifier:
    """Binary or one-vs-rest classification on top of logistic ensembles.

    Two distinct target values are mapped onto {0, 1} (ascending) and trained
    as a single ensemble; k > 2 values get one ensemble per class.
    """

    classes: list[float]
    ensembles: list[Ensemble]

    def predict_proba(self, data) -> np.ndarray:
        """(n, k) class probabilities (one-vs-rest scores normalized for k > 2)."""
        if len(self.ensembles) == 1:
            p1 = self.ensembles[0].predict_proba(data)
            return np.column_stack([1.0 - p1, p1])
        scores = np.column_stack([e.predict_proba(data) for e in self.ensembles])
        return scores / scores.sum(axis=1, keepdims=True)

    def predict_class(self, data) -> np.ndarray:
        proba = self.predict_proba(data)
        return np.asarray(self.classes, dtype=np.float64)[np.argmax(proba, axis=1)]


def train_classifier(ds: Dataset, config: BoostConfig) -> Classifier:
    """Train on an arbitrary-valued (finite) target by mapping to {0,1} or
    one-vs-rest."""
    tname = ds.target_name()
    if tname is None:
        raise DatasetError("dataset has no target column")
    config = replace(config, loss="logistic")
    y = ds.columns[tname]
    values = sorted(float(v) for v in np.unique(y))
    if len(values) < 2:
        raise DatasetError("classification target has fewer than 2 distinct values")

    def with_target(binary: np.ndarray) -> Dataset:
        cols = dict(ds.columns)
        cols[tname] = binary.astype(np.float64)
        return Dataset(list(ds.schema), cols, dict(ds.labels))

    if len(values) == 2:
        ens = train(with_target(y == values[1]), config)
        return Classifier(values, [ens])
    return Classifier(values, [train(with_target(y == v), config) for v in values])


# --- canonical model JSON ---------------------------------------------------

MODEL_FORMAT = "boostlab.model"
CLASSIFIER_FORMAT = "boostlab.classifier"
MODEL_VERSION = 1


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ModelFormatError(f"non-finite value {x!r} in model")
    return format(float(x), ".17g")


def _emit(obj) -> str:
    """Canonical JSON: insertion-ordered keys, floats at 17 significant digits."""
    if isinstance(obj, dict):
        inner = ",".join(f"{json.dumps(k)}:{_emit(v)}" for k, v in obj.items())
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_emit(v) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise ModelFormatError(f"cannot serialize {type(obj).__name__}")


def config_dict(config: BoostConfig) -> dict:
    return asdict(config)


def _tree_doc(tree) -> dict:
    nodes = []
    for nd in tree.nodes:
        if nd.is_leaf:
            nodes.append({"leaf": float(nd.weight)})
        else:
            nodes.append({"feature": nd.feature, "threshold": float(nd.threshold),
                          "default_left": nd.default_left, "left": nd.left,
                          "right": nd.right, "gain": float(nd.gain)})
    doc = {"nodes": nodes}
    if tree.level_splits is not None:
        doc["level_splits"] = [[f, float(t), d] for f, t, d in tree.level_splits]
    return doc


def ensemble_doc(ens: Ensemble) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "loss": ens.loss,
        "base_score": float(ens.base_score),
        "learning_rate": float(ens.learning_rate),
        "feature_names": list(ens.feature_names),
        "categorical_levels": {k: list(v) for k, v in ens.categorical_levels.items()},
        "config": ens.config,
        "trees": [_tree_doc(t) for t in ens.trees],
    }


def to_json(model) -> str:
    if isinstance(model, Classifier):
        doc = {
            "format": CLASSIFIER_FORMAT,
            "version": MODEL_VERSION,
            "classes": [float(c) for c in model.classes],
            "ensembles": [ensemble_doc(e) for e in model.ensembles],
        }
    else:
        doc = ensemble_doc(model)
    return _emit(doc) + "\n"


def _tree_from_doc(doc) -> growers.DecisionTree:
    nodes = []
    for nd in doc["nodes"]:
        if "leaf" in nd:
            nodes.append(growers.TreeNode(is_leaf=True, weight=float(nd["leaf"])))
        else:
            nodes.append(growers.TreeNode(
                is_leaf=False, feature=int(nd["feature"]), threshold=float(nd["threshold"]),
                default_left=bool(nd["default_left"]), left=int(nd["left"]),
                right=int(nd["right"]), gain=float(nd.get("gain", 0.0))))
    level_splits = None
    if "level_splits" in doc:
        level_splits = [(int(f), float(t), bool(d)) for f, t, d in doc["level_splits"]]
    return growers.DecisionTree(nodes, level_splits=level_splits)


def _ensemble_from_doc(doc) -> Ensemble:
    if doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"not a model document (format={doc.get('format')!r})")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")
    return Ensemble(
        trees=[_tree_from_doc(t) for t in doc["trees"]],
        base_score=float(doc["base_score"]),
        learning_rate=float(doc["learning_rate"]),
        loss=str(doc["loss"]),
        feature_names=[str(s) for s in doc["feature_names"]],
        categorical_levels={k: [str(s) for s in v]
                            for k, v in doc.get("categorical_levels", {}).items()},
        config=doc.get("config", {}),
    )


def from_json(text: str):
    """Parse a model document; raises ModelFormatError with diagnostics on
    corruption or version mismatch."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    if doc.get("format") == CLASSIFIER_FORMAT:
        if doc.get("version") != MODEL_VERSION:
            raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")
        return Classifier([float(c) for c in doc["classes"]],
                          [_ensemble_from_doc(e) for e in doc["ensembles"]])
    return _ensemble_from_doc(doc)


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_json(model))


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return from_json(fh.read())
