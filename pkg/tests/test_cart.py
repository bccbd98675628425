import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from terrafuse.cart import (
    CartClassifier,
    LeafNode,
    SplitChoice,
    SplitNode,
    TrainParams,
    best_split,
    gini,
    model_from_document,
    model_to_document,
    parse_tree,
    predict,
    predict_batch,
    serialize_tree,
    train,
)
from terrafuse.errors import (
    ConfigError,
    DimensionMismatch,
    EmptyCounts,
    EmptyTrainingSet,
    ParseError,
)
from terrafuse.samples import LabeledVectors


def vectors(x, y) -> LabeledVectors:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    return LabeledVectors(x, y, tuple(f"f{i}" for i in range(x.shape[1])))


def oracle_best_split(rows, labels, min_leaf=1):
    """Reference split chooser, written as a flat brute force.

    Recomputes each candidate's children from scratch via masks instead of
    sweeping sorted prefixes, but uses the same float expression so a
    correct implementation agrees bit for bit: per-child sum of squared
    class shares accumulated in ascending class order, then
    (n_l*(1-s_l) + n_r*(1-s_r)) / n, first strict minimum kept while
    scanning features then thresholds in ascending order.
    """
    n = len(rows)
    if n < 2:
        return None
    classes = sorted(set(labels))
    best = None  # (wimp, feature, threshold)
    for f in range(len(rows[0])):
        uniq = sorted({r[f] for r in rows})
        for lo, hi in zip(uniq, uniq[1:]):
            thr = (lo + hi) / 2.0
            if thr >= hi:
                continue
            left = [labels[i] for i in range(n) if rows[i][f] <= thr]
            right = [labels[i] for i in range(n) if rows[i][f] > thr]
            nl, nr = len(left), len(right)
            if nl < min_leaf or nr < min_leaf:
                continue
            sl = 0.0
            for c in classes:
                sl += (left.count(c) / nl) ** 2
            sr = 0.0
            for c in classes:
                sr += (right.count(c) / nr) ** 2
            wimp = (nl * (1.0 - sl) + nr * (1.0 - sr)) / n
            if best is None or wimp < best[0]:
                best = (wimp, f, thr)
    if best is None:
        return None
    return best[1], best[2], best[0]


def random_dataset(rng):
    """Small labeled dataset mixing continuous, quantized and constant
    columns; the quantized ones produce genuinely tied candidates."""
    n = int(rng.integers(2, 51))
    n_classes = int(rng.integers(2, 4))
    y = rng.integers(0, n_classes, size=n).astype(np.int64)
    if rng.integers(0, 2):
        y = y * 3 + 2  # non-contiguous class ids
    cols = []
    for _ in range(3):
        kind = int(rng.integers(0, 4))
        if kind == 0:
            col = rng.uniform(0.0, 1.0, n)
        elif kind == 1:
            col = rng.integers(0, 5, n).astype(np.float64)
        elif kind == 2:
            col = np.round(rng.uniform(0.0, 1.0, n), 1)
        else:
            col = np.full(n, float(rng.integers(0, 3)))
        cols.append(col)
    if rng.integers(0, 4) == 0:
        cols[2] = cols[0].copy()  # forces cross-feature ties
    return np.column_stack(cols), y


def walk_leaves(node):
    if isinstance(node, LeafNode):
        yield node
    else:
        yield from walk_leaves(node.left)
        yield from walk_leaves(node.right)


def depth(node) -> int:
    if isinstance(node, LeafNode):
        return 0
    return 1 + max(depth(node.left), depth(node.right))


class TestGini:
    def test_even_two_way(self):
        assert gini([5, 5]) == 0.5

    def test_pure(self):
        assert gini([10, 0]) == 0.0

    def test_even_three_way(self):
        t = (1 / 3) ** 2
        assert gini([1, 1, 1]) == 1.0 - (t + t + t)

    def test_empty_rejected(self):
        with pytest.raises(EmptyCounts):
            gini([0, 0])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            gini([3, -1])

    @given(counts=st.lists(st.integers(0, 50), min_size=1, max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_bounds(self, counts):
        if sum(counts) == 0:
            return
        g = gini(counts)
        assert 0.0 <= g < 1.0
        if sum(1 for c in counts if c) == 1:
            assert g == 0.0


class TestSplitSearch:
    def test_threshold_tie_takes_lowest(self):
        # both candidate thresholds score (0 + 2*0.5)/3; the lower wins
        choice = best_split(vectors([[0.0], [1.0], [2.0]], [0, 1, 0]))
        assert choice == SplitChoice(0, 0.5, 1.0 / 3.0)

    def test_feature_tie_takes_lowest(self):
        x = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        choice = best_split(vectors(x, [0, 0, 1, 1]))
        assert choice == SplitChoice(0, 1.5, 0.0)

    def test_adjacent_floats_cannot_separate(self):
        lo = float(np.nextafter(0.5, 0.0))
        assert best_split(vectors([[lo], [0.5]], [0, 1])) is None

    def test_adjacent_floats_above_one_still_separate(self):
        hi = float(np.nextafter(1.0, 2.0))
        choice = best_split(vectors([[1.0], [hi]], [0, 1]))
        assert choice is not None and choice.threshold == 1.0

    def test_constant_column_ignored(self):
        x = np.array([[7.0, 0.0], [7.0, 1.0], [7.0, 2.0], [7.0, 3.0]])
        choice = best_split(vectors(x, [0, 0, 1, 1]))
        assert choice == SplitChoice(1, 1.5, 0.0)

    def test_min_leaf_filters_candidates(self):
        data = vectors([[0.0], [1.0], [2.0], [3.0]], [0, 0, 0, 1])
        assert best_split(data) == SplitChoice(0, 2.5, 0.0)
        assert best_split(data, min_leaf=2) == SplitChoice(0, 1.5, 0.25)

    def test_single_row_gives_none(self):
        assert best_split(vectors([[1.0]], [0])) is None

    def test_identical_rows_give_none(self):
        assert best_split(vectors([[1.0], [1.0], [1.0]], [0, 1, 0])) is None

    def test_matches_oracle_on_random_datasets(self):
        rng = np.random.default_rng(20260821)
        min_leafs = (1, 1, 2, 3)
        checked = 0
        for i in range(200):
            x, y = random_dataset(rng)
            ml = min_leafs[i % 4]
            got = best_split(vectors(x, y), min_leaf=ml)
            want = oracle_best_split(x.tolist(), y.tolist(), min_leaf=ml)
            if want is None:
                assert got is None
            else:
                # exact equality, thresholds and impurities included
                assert got == SplitChoice(*want)
            checked += 1
        assert checked == 200


class TestTrain:
    def test_params_validated(self):
        with pytest.raises(ConfigError):
            TrainParams(max_depth=0)
        with pytest.raises(ConfigError):
            TrainParams(min_leaf_samples=0)
        with pytest.raises(ConfigError):
            TrainParams(min_impurity_decrease=-0.1)

    def test_empty_rejected(self):
        empty = vectors(np.empty((0, 2)), np.empty(0, dtype=np.int64))
        with pytest.raises(EmptyTrainingSet):
            train(empty)

    def test_single_row_is_leaf(self):
        tree = train(vectors([[4.0, 5.0]], [3]))
        assert tree == LeafNode(3, {3: 1})

    def test_pure_node_is_leaf(self):
        tree = train(vectors([[0.0], [1.0], [2.0]], [7, 7, 7]))
        assert tree == LeafNode(7, {7: 3})

    def test_xor_fully_separated(self):
        x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1, 1, 0])
        tree = train(vectors(x, y))
        assert predict_batch(tree, x).tolist() == [0, 1, 1, 0]

    def test_max_depth_one(self):
        x = np.array([[0.0], [1.0], [2.0], [3.0]])
        tree = train(vectors(x, [0, 1, 2, 2]), TrainParams(max_depth=1))
        assert isinstance(tree, SplitNode)
        assert isinstance(tree.left, LeafNode) and isinstance(tree.right, LeafNode)

    def test_max_depth_respected(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            x, y = random_dataset(rng)
            assert depth(train(vectors(x, y), TrainParams(max_depth=3))) <= 3

    def test_min_leaf_respected(self):
        rng = np.random.default_rng(7)
        seen_split = False
        for _ in range(10):
            x, y = random_dataset(rng)
            tree = train(vectors(x, y), TrainParams(min_leaf_samples=4))
            if isinstance(tree, SplitNode):
                seen_split = True
                for leaf in walk_leaves(tree):
                    assert sum(leaf.counts.values()) >= 4
        assert seen_split

    def test_impurity_gate(self):
        data = vectors([[0.0], [1.0]], [0, 1])  # gain of the only split: 0.5
        assert isinstance(train(data, TrainParams(min_impurity_decrease=0.4)), SplitNode)
        assert isinstance(train(data, TrainParams(min_impurity_decrease=0.6)), LeafNode)

    def test_zero_gate_accepts_zero_gain_split(self):
        # both xor splits have zero gain on their own; the default gate
        # must not reject them or the tree stops at a coin-flip leaf
        x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        tree = train(vectors(x, [0, 1, 1, 0]), TrainParams(min_impurity_decrease=0.0))
        assert isinstance(tree, SplitNode)

    def test_unsplittable_tie_leaf_takes_lowest_class(self):
        lo = float(np.nextafter(0.5, 0.0))
        tree = train(vectors([[lo], [0.5]], [4, 1]))
        assert tree == LeafNode(1, {1: 1, 4: 1})

    def test_deterministic(self):
        rng = np.random.default_rng(11)
        x, y = random_dataset(rng)
        a = serialize_tree(train(vectors(x, y)))
        b = serialize_tree(train(vectors(x.copy(), y.copy())))
        assert a == b

    def test_leaf_counts_partition_rows(self):
        rng = np.random.default_rng(13)
        x, y = random_dataset(rng)
        tree = train(vectors(x, y))
        totals = {}
        for leaf in walk_leaves(tree):
            for cid, cnt in leaf.counts.items():
                totals[cid] = totals.get(cid, 0) + cnt
        want = {int(c): int(n) for c, n in zip(*np.unique(y, return_counts=True))}
        assert totals == want


class TestPredict:
    def small_tree(self):
        return SplitNode(0, 0.5, LeafNode(1, {1: 2}), LeafNode(2, {2: 2}))

    def test_boundary_goes_left(self):
        assert predict(self.small_tree(), [0.5]) == 1
        assert predict(self.small_tree(), [np.nextafter(0.5, 1.0)]) == 2

    def test_short_vector_rejected(self):
        tree = SplitNode(2, 0.0, LeafNode(0, {0: 1}), LeafNode(1, {1: 1}))
        with pytest.raises(DimensionMismatch):
            predict(tree, [1.0, 2.0])
        with pytest.raises(DimensionMismatch):
            predict_batch(tree, np.zeros((4, 2)))

    def test_batch_needs_two_dims(self):
        with pytest.raises(DimensionMismatch):
            predict_batch(self.small_tree(), np.zeros(3))

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_batch_equals_scalar_map(self, seed):
        rng = np.random.default_rng(seed)
        x, y = random_dataset(rng)
        tree = train(vectors(x, y), TrainParams(max_depth=6))
        q = rng.uniform(-1.0, 6.0, size=(40, 3))
        assert predict_batch(tree, q).tolist() == [predict(tree, row) for row in q]


class TestTreeDocument:
    def test_leaf_document_bytes(self):
        text = serialize_tree(LeafNode(1, {1: 4, 0: 2}))
        assert text == '{"type": "leaf", "class": 1, "counts": {"0": 2, "1": 4}}\n'

    def test_split_document_bytes(self):
        tree = SplitNode(0, 0.5, LeafNode(0, {0: 1}), LeafNode(1, {1: 2}))
        assert serialize_tree(tree) == (
            '{"type": "split", "feature": 0, "threshold": 0.5, '
            '"left": {"type": "leaf", "class": 0, "counts": {"0": 1}}, '
            '"right": {"type": "leaf", "class": 1, "counts": {"1": 2}}}\n'
        )

    def test_counts_keys_sorted_numerically(self):
        text = serialize_tree(LeafNode(10, {10: 1, 2: 3}))
        assert '"counts": {"2": 3, "10": 1}' in text

    def test_round_trip_identity(self):
        rng = np.random.default_rng(17)
        x, y = random_dataset(rng)
        tree = train(vectors(x, y))
        text = serialize_tree(tree)
        assert parse_tree(text) == tree
        assert serialize_tree(parse_tree(text)) == text

    def test_threshold_floats_survive(self):
        thr = 0.1 + 0.2  # not exactly 0.3; shortest repr must round-trip
        tree = SplitNode(0, thr, LeafNode(0, {0: 1}), LeafNode(1, {1: 1}))
        assert parse_tree(serialize_tree(tree)).threshold == thr

    def test_parse_rejects_bad_json(self):
        with pytest.raises(ParseError):
            parse_tree("{")

    def test_parse_rejects_unknown_type(self):
        with pytest.raises(ParseError):
            parse_tree('{"type": "forest"}')

    def test_parse_rejects_boolean_class(self):
        with pytest.raises(ParseError):
            parse_tree('{"type": "leaf", "class": true, "counts": {"0": 1}}')

    def test_parse_rejects_missing_child(self):
        doc = {"type": "split", "feature": 0, "threshold": 1.0,
               "left": {"type": "leaf", "class": 0, "counts": {"0": 1}}}
        with pytest.raises(ParseError):
            parse_tree(json.dumps(doc))

    def test_parse_rejects_string_threshold(self):
        doc = {"type": "split", "feature": 0, "threshold": "x",
               "left": {"type": "leaf", "class": 0, "counts": {"0": 1}},
               "right": {"type": "leaf", "class": 1, "counts": {"1": 1}}}
        with pytest.raises(ParseError):
            parse_tree(json.dumps(doc))

    def test_parse_rejects_empty_counts(self):
        with pytest.raises(ParseError):
            parse_tree('{"type": "leaf", "class": 0, "counts": {}}')


def blobs(rng, n_per=20):
    xs, ys = [], []
    for cid in range(3):
        xs.append(rng.uniform(-1.0, 1.0, size=(n_per, 3)) + 3.0 * cid)
        ys.append(np.full(n_per, cid, dtype=np.int64))
    return np.vstack(xs), np.concatenate(ys)


class TestEstimator:
    def test_fit_returns_self_and_separates_blobs(self):
        x, y = blobs(np.random.default_rng(0))
        clf = CartClassifier()
        assert clf.fit(x, y) is clf
        assert (clf.predict(x) == y).all()
        assert clf.classes_.tolist() == [0, 1, 2]
        assert clf.n_features_in_ == 3

    def test_predict_matches_tree_functions(self):
        x, y = blobs(np.random.default_rng(1))
        clf = CartClassifier(max_depth=4).fit(x, y)
        assert (clf.predict(x) == predict_batch(clf.tree_, x)).all()

    def test_unfitted_predict_rejected(self):
        with pytest.raises(NotFittedError):
            CartClassifier().predict([[0.0]])

    def test_wrong_width_rejected(self):
        x, y = blobs(np.random.default_rng(2))
        clf = CartClassifier().fit(x, y)
        with pytest.raises(DimensionMismatch):
            clf.predict(x[:, :2])

    def test_empty_fit_rejected(self):
        with pytest.raises(EmptyTrainingSet):
            CartClassifier().fit(np.empty((0, 2)), np.empty(0))

    def test_clone_keeps_params(self):
        clf = CartClassifier(max_depth=3, min_leaf_samples=2, min_impurity_decrease=0.1)
        assert clone(clf).get_params() == clf.get_params()

    def test_fit_vectors_keeps_band_order_and_legend(self):
        x, y = blobs(np.random.default_rng(3))
        data = LabeledVectors(
            x, y, ("B2", "B3", "B4"), legend={0: "water", 1: "urban", 2: "non-urban"}
        )
        clf = CartClassifier().fit_vectors(data)
        assert clf.band_names_ == ("B2", "B3", "B4")
        assert clf.legend_ == {0: "water", 1: "urban", 2: "non-urban"}


class TestModelDocument:
    def fitted(self):
        x, y = blobs(np.random.default_rng(5))
        data = LabeledVectors(
            x, y, ("B2", "B3", "B4"), legend={0: "water", 1: "urban", 2: "non-urban"}
        )
        return CartClassifier(max_depth=5, min_leaf_samples=2).fit_vectors(data)

    def test_document_shape(self):
        doc = json.loads(model_to_document(self.fitted()))
        assert doc["format"] == "terrafuse-tree"
        assert doc["version"] == 1
        assert doc["band_names"] == ["B2", "B3", "B4"]
        assert doc["legend"] == {"0": "water", "1": "urban", "2": "non-urban"}
        assert doc["params"] == {
            "max_depth": 5, "min_leaf_samples": 2, "min_impurity_decrease": 0.0,
        }
        assert doc["root"]["type"] in ("split", "leaf")

    def test_round_trip(self):
        clf = self.fitted()
        text = model_to_document(clf)
        back = model_from_document(text)
        assert back.tree_ == clf.tree_
        assert back.band_names_ == clf.band_names_
        assert back.legend_ == clf.legend_
        assert back.classes_.tolist() == clf.classes_.tolist()
        assert back.n_features_in_ == 3
        assert model_to_document(back) == text
        q = np.random.default_rng(6).uniform(-2.0, 8.0, size=(50, 3))
        assert (back.predict(q) == clf.predict(q)).all()

    def test_bad_magic_rejected(self):
        with pytest.raises(ParseError):
            model_from_document('{"format": "something-else", "root": {}}')

    def test_not_json_rejected(self):
        with pytest.raises(ParseError):
            model_from_document("[")
