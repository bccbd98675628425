"""From-scratch CART classifier: Gini impurity, exhaustive binary threshold
splits, recursive partitioning, prediction and a text tree document.

Split search contract (all of it deterministic, so two runs agree
bit-for-bit):
  * candidate thresholds are midpoints between consecutive distinct sorted
    values of each feature;
  * the winner minimizes the size-weighted mean of child Gini,
    (n_l * G_l + n_r * G_r) / n;
  * ties break by lowest weighted impurity, then lowest feature index,
    then lowest threshold;
  * rows with x[feature] <= threshold go left, boundary included.

The estimator face (`CartClassifier`) follows the sklearn fit/predict
protocol so the tree composes with the wider ecosystem; the module-level
functions operate on the raw node tree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyCounts,
    EmptyTrainingSet,
    ParseError,
)
from .samples import LabeledVectors


@dataclass(frozen=True)
class LeafNode:
    class_id: int
    counts: dict[int, int]


@dataclass(frozen=True)
class SplitNode:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = LeafNode | SplitNode


@dataclass(frozen=True)
class TrainParams:
    max_depth: int = 12
    min_leaf_samples: int = 1
    min_impurity_decrease: float = 0.0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.min_leaf_samples < 1:
            raise ConfigError("min_leaf_samples must be >= 1")
        if self.min_impurity_decrease < 0:
            raise ConfigError("min_impurity_decrease must be >= 0")


@dataclass(frozen=True)
class SplitChoice:
    feature: int
    threshold: float
    weighted_impurity: float


def gini(counts) -> float:
    """Gini impurity 1 - sum((n_c / N)^2) of a per-class count vector."""
    counts = list(counts)
    if any(c < 0 for c in counts):
        raise ValueError("counts must be non-negative")
    total = sum(counts)
    if total <= 0:
        raise EmptyCounts("gini of an empty count vector is undefined")
    s = 0.0
    for c in counts:
        s += (c / total) ** 2
    return 1.0 - s


def _search_split(
    x: np.ndarray, y_codes, n_classes: int, min_leaf: int = 1
) -> tuple[int, float, float] | None:
    """Exhaustive split search over (feature, midpoint) candidates.

    Returns (feature, threshold, weighted_child_impurity) or None when no
    candidate separates the rows. Candidates whose midpoint rounds up to
    the next distinct value (float-adjacent values) cannot separate the
    rows with the <= rule and are skipped.
    """
    n, d = x.shape
    if n < 2:
        return None
    y_list = list(map(int, y_codes))
    total = [0] * n_classes
    for c in y_list:
        total[c] += 1
    best: tuple[float, int, float] | None = None  # (wimp, feature, threshold)
    for f in range(d):
        col = x[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order].tolist()
        sy = [y_list[i] for i in order]
        left = [0] * n_classes
        right = total.copy()
        for i in range(n - 1):
            c = sy[i]
            left[c] += 1
            right[c] -= 1
            if sv[i] == sv[i + 1]:
                continue
            nl = i + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            thr = (sv[i] + sv[i + 1]) / 2.0
            if thr >= sv[i + 1]:
                continue
            sl = 0.0
            for cnt in left:
                sl += (cnt / nl) ** 2
            sr = 0.0
            for cnt in right:
                sr += (cnt / nr) ** 2
            wimp = (nl * (1.0 - sl) + nr * (1.0 - sr)) / n
            if best is None or wimp < best[0]:
                best = (wimp, f, thr)
    if best is None:
        return None
    return best[1], best[2], best[0]


def best_split(data: LabeledVectors, min_leaf: int = 1) -> SplitChoice | None:
    """Best (feature, threshold) split of a labeled vector set, or None."""
    if len(data) < 2:
        return None
    classes = np.unique(data.y)
    codes = np.searchsorted(classes, data.y)
    found = _search_split(data.x, codes, len(classes), min_leaf=min_leaf)
    if found is None:
        return None
    f, thr, wimp = found
    return SplitChoice(f, thr, wimp)


def _counts_dict(y_codes, classes) -> dict[int, int]:
    counts = {int(c): 0 for c in classes}
    for c in y_codes:
        counts[int(classes[c])] += 1
    return counts


def _majority(counts: dict[int, int]) -> int:
    # tie goes to the lowest class id
    best_id, best_n = None, -1
    for cid in sorted(counts):
        if counts[cid] > best_n:
            best_id, best_n = cid, counts[cid]
    return best_id


def _build(x, y_codes, classes, params: TrainParams, depth: int) -> TreeNode:
    counts = _counts_dict(y_codes, classes)
    n = len(y_codes)
    n_present = sum(1 for v in counts.values() if v)
    if (
        n_present <= 1
        or depth >= params.max_depth
        or n < 2 * params.min_leaf_samples
    ):
        return LeafNode(_majority(counts), counts)
    found = _search_split(x, y_codes, len(classes), min_leaf=params.min_leaf_samples)
    if found is None:
        return LeafNode(_majority(counts), counts)
    f, thr, wimp = found
    if params.min_impurity_decrease > 0:
        parent = gini([counts[int(c)] for c in classes])
        if parent - wimp < params.min_impurity_decrease:
            return LeafNode(_majority(counts), counts)
    mask = x[:, f] <= thr
    left = _build(x[mask], y_codes[mask], classes, params, depth + 1)
    right = _build(x[~mask], y_codes[~mask], classes, params, depth + 1)
    return SplitNode(f, thr, left, right)


def train(data: LabeledVectors, params: TrainParams = TrainParams()) -> TreeNode:
    """Grow a tree by recursive partitioning; see the module docstring for
    the split and stopping rules."""
    if len(data) == 0:
        raise EmptyTrainingSet("cannot train on an empty vector set")
    classes = np.unique(data.y)
    codes = np.searchsorted(classes, data.y).astype(np.int64)
    return _build(data.x, codes, classes, params, depth=0)


def predict(tree: TreeNode, x) -> int:
    """Classify one feature vector by deterministic descent (<= goes left)."""
    x = np.asarray(x, dtype=np.float64)
    node = tree
    while isinstance(node, SplitNode):
        if node.feature >= x.shape[0]:
            raise DimensionMismatch(
                f"tree needs feature {node.feature}, vector has {x.shape[0]}"
            )
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.class_id


def predict_batch(tree: TreeNode, x: np.ndarray) -> np.ndarray:
    """Vectorized predict over the rows of x; equals map(predict, rows)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch("predict_batch expects a 2-D array")
    out = np.empty(x.shape[0], dtype=np.int64)
    frontier = [(tree, np.arange(x.shape[0]))]
    while frontier:
        node, idx = frontier.pop()
        if isinstance(node, LeafNode):
            out[idx] = node.class_id
            continue
        if node.feature >= x.shape[1]:
            raise DimensionMismatch(
                f"tree needs feature {node.feature}, rows have {x.shape[1]}"
            )
        goes_left = x[idx, node.feature] <= node.threshold
        frontier.append((node.left, idx[goes_left]))
        frontier.append((node.right, idx[~goes_left]))
    return out


def _node_to_obj(node: TreeNode):
    if isinstance(node, LeafNode):
        return {
            "type": "leaf",
            "class": node.class_id,
            "counts": {str(k): node.counts[k] for k in sorted(node.counts)},
        }
    return {
        "type": "split",
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_obj(node.left),
        "right": _node_to_obj(node.right),
    }


def _node_from_obj(obj) -> TreeNode:
    if not isinstance(obj, dict):
        raise ParseError("tree node must be an object")
    kind = obj.get("type")
    if kind == "leaf":
        cls = obj.get("class")
        counts_raw = obj.get("counts")
        if (
            not isinstance(cls, int)
            or isinstance(cls, bool)
            or not isinstance(counts_raw, dict)
            or not counts_raw
        ):
            raise ParseError("malformed leaf node")
        try:
            counts = {int(k): int(v) for k, v in counts_raw.items()}
        except (TypeError, ValueError) as e:
            raise ParseError(f"malformed leaf counts: {e}") from e
        return LeafNode(cls, counts)
    if kind == "split":
        feature = obj.get("feature")
        threshold = obj.get("threshold")
        if (
            not isinstance(feature, int)
            or isinstance(feature, bool)
            or not isinstance(threshold, (int, float))
            or isinstance(threshold, bool)
        ):
            raise ParseError("malformed split node")
        return SplitNode(
            feature,
            float(threshold),
            _node_from_obj(obj.get("left")),
            _node_from_obj(obj.get("right")),
        )
    raise ParseError(f"unknown node type {kind!r}")


def serialize_tree(tree: TreeNode) -> str:
    """Tree document text; floats keep their shortest round-trip form."""
    return json.dumps(_node_to_obj(tree)) + "\n"


def parse_tree(text: str) -> TreeNode:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"not valid JSON: {e}") from e
    return _node_from_obj(obj)


class CartClassifier(ClassifierMixin, BaseEstimator):
    """CART decision-tree classifier (Gini impurity, exhaustive midpoint
    splits, deterministic tie-breaking).

    Parameters
    ----------
    max_depth : int, default=12
        Maximum tree depth; depth 0 is a single leaf.
    min_leaf_samples : int, default=1
        Minimum rows each child of a split must keep.
    min_impurity_decrease : float, default=0.0
        Pre-pruning floor; a node splits only if the parent-minus-children
        impurity decrease reaches this value. 0 accepts any separating
        split.
    """

    def __init__(
        self,
        max_depth: int = 12,
        min_leaf_samples: int = 1,
        min_impurity_decrease: float = 0.0,
    ):
        self.max_depth = max_depth
        self.min_leaf_samples = min_leaf_samples
        self.min_impurity_decrease = min_impurity_decrease

    def _params(self) -> TrainParams:
        return TrainParams(
            max_depth=self.max_depth,
            min_leaf_samples=self.min_leaf_samples,
            min_impurity_decrease=self.min_impurity_decrease,
        )

    def fit(self, X, y, band_names=None, legend=None):
        if len(np.asarray(y)) == 0:
            raise EmptyTrainingSet("cannot fit on an empty training set")
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = np.unique(y)
        self.n_features_in_ = X.shape[1]
        codes = np.searchsorted(self.classes_, y).astype(np.int64)
        self.tree_ = _build(X, codes, self.classes_, self._params(), depth=0)
        self.band_names_ = tuple(band_names) if band_names is not None else None
        self.legend_ = dict(legend) if legend is not None else None
        return self

    def fit_vectors(self, vectors: LabeledVectors):
        """Fit from a LabeledVectors bundle, keeping its band order and legend."""
        if len(vectors) == 0:
            raise EmptyTrainingSet("cannot fit on an empty vector set")
        return self.fit(
            vectors.x, vectors.y, band_names=vectors.band_names, legend=vectors.legend
        )

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "tree_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"model was trained on {self.n_features_in_} features, "
                f"got {X.shape[1]}"
            )
        return predict_batch(self.tree_, X)


MODEL_FORMAT = "terrafuse-tree"


def model_to_document(clf: CartClassifier) -> str:
    """CLI/service model artifact: the spec node schema plus the band order
    and legend the classifier needs for stack classification."""
    check_is_fitted(clf, "tree_")
    doc = {
        "format": MODEL_FORMAT,
        "version": 1,
        "band_names": list(clf.band_names_) if clf.band_names_ else None,
        "legend": (
            {str(k): v for k, v in sorted(clf.legend_.items())}
            if clf.legend_
            else None
        ),
        "params": {
            "max_depth": clf.max_depth,
            "min_leaf_samples": clf.min_leaf_samples,
            "min_impurity_decrease": clf.min_impurity_decrease,
        },
        "root": _node_to_obj(clf.tree_),
    }
    return json.dumps(doc, indent=2) + "\n"


def model_from_document(text: str) -> CartClassifier:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"not valid JSON: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ParseError(f"bad magic, expected {MODEL_FORMAT!r}")
    params = doc.get("params") or {}
    try:
        clf = CartClassifier(
            max_depth=int(params.get("max_depth", 12)),
            min_leaf_samples=int(params.get("min_leaf_samples", 1)),
            min_impurity_decrease=float(params.get("min_impurity_decrease", 0.0)),
        )
    except (TypeError, ValueError) as e:
        raise ParseError(f"malformed params: {e}") from e
    root = _node_from_obj(doc.get("root"))
    clf.tree_ = root
    band_names = doc.get("band_names")
    clf.band_names_ = tuple(band_names) if band_names else None
    legend_raw = doc.get("legend")
    clf.legend_ = (
        {int(k): str(v) for k, v in legend_raw.items()} if legend_raw else None
    )
    class_ids = set()
    frontier = [root]
    while frontier:
        node = frontier.pop()
        if isinstance(node, LeafNode):
            class_ids.update(node.counts)
        else:
            frontier.extend((node.left, node.right))
    clf.classes_ = np.array(sorted(class_ids), dtype=np.int64)
    clf.n_features_in_ = (
        len(clf.band_names_) if clf.band_names_ else _max_feature(root) + 1
    )
    return clf


def _max_feature(node: TreeNode) -> int:
    if isinstance(node, LeafNode):
        return -1
    return max(node.feature, _max_feature(node.left), _max_feature(node.right))
