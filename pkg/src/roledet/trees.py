"""Tree classifiers: random forest, SAMME AdaBoost, and histogram gradient boosting.

All three share a flat-array tree representation. The forest and the boosting
stumps use an exact weighted Gini splitter; the gradient-boosted trees use
quantile histograms with at most `n_bins` bins per feature, which is lossless
whenever a feature has no more distinct values than bins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .seeds import derive_seed

_MIN_GAIN = 1e-12


@dataclass
class DecisionTree:
    """Binary tree stored as parallel arrays; leaves have feature == -1.

    Routing: go left when x[feature] <= threshold. `value` holds the
    per-class distribution (classification) or the single leaf score
    (gradient boosting) for every node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf slot for every row."""
        X = np.asarray(X, dtype=np.float64)
        idx = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[idx]
            active = feat >= 0
            if not active.any():
                return idx
            rows = np.flatnonzero(active)
            go_left = X[rows, feat[rows]] <= self.threshold[idx[rows]]
            idx[rows[go_left]] = self.left[idx[rows[go_left]]]
            idx[rows[~go_left]] = self.right[idx[rows[~go_left]]]

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


class _TreeBuilder:
    def __init__(self, n_value_cols: int):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[np.ndarray] = []
        self._cols = n_value_cols

    def add_node(self, value) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(np.asarray(value, dtype=np.float64))
        return len(self.feature) - 1

    def set_split(self, slot: int, feature: int, threshold: float, left: int, right: int):
        self.feature[slot] = feature
        self.threshold[slot] = threshold
        self.left[slot] = left
        self.right[slot] = right

    def build(self) -> DecisionTree:
        return DecisionTree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.vstack(self.value) if self.value else np.empty((0, self._cols)),
        )


def _best_gini_split(X, y, w, idx, feat_order, n_try, n_classes):
    """Best weighted-Gini split over the first n_try features of feat_order.

    If none of those features yields a positive impurity decrease, keeps
    scanning the remaining features until one does (so an unlucky feature
    draw cannot stop growth while the node is still separable).
    Returns (decrease, feature, threshold) or None.
    """
    wn = w[idx]
    yn = y[idx]
    onehot = np.zeros((len(idx), n_classes))
    onehot[np.arange(len(idx)), yn] = wn
    w_total = wn.sum()
    class_tot = onehot.sum(axis=0)
    parent_gini = 1.0 - ((class_tot / w_total) ** 2).sum()

    best = None
    for scanned, f in enumerate(feat_order, start=1):
        col = X[idx, f]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        boundaries = np.flatnonzero(sv[1:] > sv[:-1]) + 1
        if len(boundaries) > 0:
            cum = onehot[order].cumsum(axis=0)
            left_cum = cum[boundaries - 1]
            wl = left_cum.sum(axis=1)
            wr = w_total - wl
            gini_l = 1.0 - ((left_cum / wl[:, None]) ** 2).sum(axis=1)
            right_cum = class_tot[None, :] - left_cum
            gini_r = 1.0 - ((right_cum / wr[:, None]) ** 2).sum(axis=1)
            decrease = parent_gini - (wl * gini_l + wr * gini_r) / w_total
            j = int(np.argmax(decrease))
            if decrease[j] > _MIN_GAIN and (best is None or decrease[j] > best[0]):
                pos = boundaries[j]
                best = (float(decrease[j]), int(f), float((sv[pos - 1] + sv[pos]) / 2.0))
        if scanned >= n_try and best is not None:
            return best
    return best


def _grow_gini_tree(X, y, w, n_classes, max_depth, features_per_split, rng) -> DecisionTree:
    builder = _TreeBuilder(n_classes)
    n_features = X.shape[1]
    root_idx = np.arange(len(y))
    stack = [(root_idx, 0, builder.add_node(_class_distribution(y, w, root_idx, n_classes)))]
    while stack:
        idx, depth, slot = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        if len(idx) < 2 or _is_pure(y, idx):
            continue
        if features_per_split >= n_features or rng is None:
            feat_order = np.arange(n_features)
        else:
            feat_order = rng.permutation(n_features)
        split = _best_gini_split(X, y, w, idx, feat_order, features_per_split, n_classes)
        if split is None:
            continue
        _, f, thr = split
        go_left = X[idx, f] <= thr
        left_idx, right_idx = idx[go_left], idx[~go_left]
        left_slot = builder.add_node(_class_distribution(y, w, left_idx, n_classes))
        right_slot = builder.add_node(_class_distribution(y, w, right_idx, n_classes))
        builder.set_split(slot, f, thr, left_slot, right_slot)
        stack.append((right_idx, depth + 1, right_slot))
        stack.append((left_idx, depth + 1, left_slot))
    return builder.build()


def _class_distribution(y, w, idx, n_classes):
    dist = np.bincount(y[idx], weights=w[idx], minlength=n_classes)
    return dist / dist.sum()


def _is_pure(y, idx):
    first = y[idx[0]]
    return bool((y[idx] == first).all())


def _infer_classes(y, n_classes):
    y = np.asarray(y, dtype=np.int64)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if len(np.unique(y)) < 2:
        raise ValueError("training labels contain a single class")
    return y, n_classes


# ---------------------------------------------------------------------------
# Random forest


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 300
    bootstrap: bool = False
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    max_depth: int | None = None  # None -> grow to the maximum extent
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    n_classes: int
    config: ForestConfig


def train_forest(X, y, cfg: ForestConfig, n_classes: int | None = None) -> ForestModel:
    """Fit n_trees unpruned Gini trees on the full sample set (bootstrap optional).

    With bootstrapping off, tree diversity comes entirely from per-split
    feature subsampling.
    """
    X = np.asarray(X, dtype=np.float64)
    y, n_classes = _infer_classes(y, n_classes)
    d = X.shape[1]
    per_split = cfg.features_per_split or int(np.ceil(np.sqrt(d)))
    per_split = min(per_split, d)
    w = np.full(len(y), 1.0 / len(y))

    trees = []
    for t in range(cfg.n_trees):
        rng = np.random.default_rng(derive_seed(cfg.seed, "forest-tree", t))
        if cfg.bootstrap:
            rows = rng.integers(0, len(y), size=len(y))
            Xt, yt, wt = X[rows], y[rows], w
        else:
            Xt, yt, wt = X, y, w
        trees.append(_grow_gini_tree(Xt, yt, wt, n_classes, cfg.max_depth, per_split, rng))
    return ForestModel(trees=trees, n_classes=n_classes, config=cfg)


def majority_vote(votes: np.ndarray, n_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """Aggregate per-tree label votes (n_trees, n_samples) into labels and vote shares.

    Ties go to the lowest class index.
    """
    shares = np.zeros((votes.shape[1], n_classes))
    for row in votes:
        shares[np.arange(votes.shape[1]), row] += 1.0
    shares /= votes.shape[0]
    return shares.argmax(axis=1), shares


def predict_forest(model: ForestModel, X) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    votes = np.stack([tree.predict_value(X).argmax(axis=1) for tree in model.trees])
    return majority_vote(votes, model.n_classes)


# ---------------------------------------------------------------------------
# AdaBoost (multi-class SAMME with depth-limited stumps)


@dataclass(frozen=True)
class AdaBoostConfig:
    n_rounds: int = 50
    stump_depth: int = 1
    seed: int = 0
    record_weight_history: bool = False

    def __post_init__(self):
        if self.stump_depth < 1:
            raise ValueError("stump_depth must be >= 1")


@dataclass
class AdaBoostModel:
    stumps: list[DecisionTree]
    alphas: list[float]
    n_classes: int
    config: AdaBoostConfig
    weight_history: list[np.ndarray] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)


def samme_alpha(err: float, n_classes: int) -> float:
    """Stage weight ln((1-err)/err) + ln(K-1) with err clamped away from {0, 1}."""
    err = min(max(err, 1e-10), 1.0 - 1e-10)
    return float(np.log((1.0 - err) / err) + np.log(n_classes - 1))


def train_adaboost(X, y, cfg: AdaBoostConfig, n_classes: int | None = None) -> AdaBoostModel:
    """SAMME: reweight misclassified samples by exp(alpha) each round.

    A round whose weighted error reaches 1 - 1/K (no better than chance)
    is discarded and terminates boosting.
    """
    X = np.asarray(X, dtype=np.float64)
    y, n_classes = _infer_classes(y, n_classes)
    n = len(y)
    w = np.full(n, 1.0 / n)
    model = AdaBoostModel(stumps=[], alphas=[], n_classes=n_classes, config=cfg)

    for _ in range(cfg.n_rounds):
        stump = _grow_gini_tree(
            X, y, w, n_classes, cfg.stump_depth, X.shape[1], rng=None
        )
        pred = stump.predict_value(X).argmax(axis=1)
        miss = pred != y
        err = float(w[miss].sum())
        if err >= 1.0 - 1.0 / n_classes - 1e-12:
            if not model.stumps:
                raise ValueError("first stump is no better than chance; cannot boost")
            break
        alpha = samme_alpha(err, n_classes)
        w = w * np.where(miss, np.exp(alpha), 1.0)
        w = w / w.sum()
        model.stumps.append(stump)
        model.alphas.append(alpha)
        model.errors.append(err)
        if cfg.record_weight_history:
            model.weight_history.append(w.copy())
    return model


def predict_adaboost(model: AdaBoostModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Argmax of alpha-weighted stump votes; probabilities are normalized vote weights."""
    X = np.asarray(X, dtype=np.float64)
    scores = np.zeros((len(X), model.n_classes))
    for stump, alpha in zip(model.stumps, model.alphas):
        picked = stump.predict_value(X).argmax(axis=1)
        scores[np.arange(len(X)), picked] += alpha
    probs = scores / scores.sum(axis=1, keepdims=True)
    return probs.argmax(axis=1), probs


# ---------------------------------------------------------------------------
# Gradient-boosted trees (softmax objective, histogram splits)


@dataclass(frozen=True)
class GbtConfig:
    n_rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    row_subsample: float = 0.5
    n_bins: int = 256
    reg_lambda: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 2 <= self.n_bins <= 256:
            raise ValueError("n_bins must be in [2, 256]")
        if not 0.0 < self.row_subsample <= 1.0:
            raise ValueError("row_subsample must be in (0, 1]")


@dataclass
class GbtModel:
    trees: list[list[DecisionTree]]  # trees[round][class]
    n_classes: int
    config: GbtConfig
    bin_edges: list[np.ndarray] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)


def compute_bin_edges(X: np.ndarray, n_bins: int) -> list[np.ndarray]:
    """Per-feature cut points: midpoints of distinct values when they fit in
    n_bins (lossless), otherwise deduplicated quantiles."""
    edges = []
    for f in range(X.shape[1]):
        uniq = np.unique(X[:, f])
        if len(uniq) <= n_bins:
            edges.append((uniq[:-1] + uniq[1:]) / 2.0)
        else:
            qs = np.quantile(X[:, f], np.arange(1, n_bins) / n_bins)
            edges.append(np.unique(qs))
    return edges


def bin_features(X: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    """Bin index per (row, feature): bin b holds values in (edge[b-1], edge[b]]."""
    binned = np.empty(X.shape, dtype=np.int32)
    for f, e in enumerate(edges):
        binned[:, f] = np.searchsorted(e, X[:, f], side="left")
    return binned


def _grow_hist_tree(binned, edges, g, h, idx, max_depth, reg) -> DecisionTree:
    d = binned.shape[1]
    n_bins_per_feat = np.array([len(e) + 1 for e in edges])
    nb_max = int(n_bins_per_feat.max())
    offsets = np.arange(d, dtype=np.int64) * nb_max

    builder = _TreeBuilder(1)

    def newton_value(node_idx):
        G = g[node_idx].sum()
        H = h[node_idx].sum()
        return [-G / (H + reg)] if H + reg > 0 else [0.0]

    stack = [(idx, 0, builder.add_node(newton_value(idx)))]
    while stack:
        node_idx, depth, slot = stack.pop()
        if depth >= max_depth or len(node_idx) < 2 or nb_max < 2:
            continue
        sub = binned[node_idx]
        flat = (sub + offsets[None, :]).ravel()
        weights_g = np.repeat(g[node_idx], d)
        weights_h = np.repeat(h[node_idx], d)
        hist_g = np.bincount(flat, weights=weights_g, minlength=d * nb_max).reshape(d, nb_max)
        hist_h = np.bincount(flat, weights=weights_h, minlength=d * nb_max).reshape(d, nb_max)
        hist_c = np.bincount(flat, minlength=d * nb_max).reshape(d, nb_max)

        G_tot = g[node_idx].sum()
        H_tot = h[node_idx].sum()
        C_tot = len(node_idx)
        GL = hist_g.cumsum(axis=1)[:, :-1]
        HL = hist_h.cumsum(axis=1)[:, :-1]
        CL = hist_c.cumsum(axis=1)[:, :-1]
        GR, HR, CR = G_tot - GL, H_tot - HL, C_tot - CL

        valid = (CL > 0) & (CR > 0) & (HL + reg > 0) & (HR + reg > 0)
        parent_score = G_tot**2 / (H_tot + reg)
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = GL**2 / (HL + reg) + GR**2 / (HR + reg) - parent_score
        gain[~valid] = -np.inf
        j = int(np.argmax(gain))
        f, b = divmod(j, nb_max - 1)
        if gain[f, b] <= _MIN_GAIN:
            continue

        go_left = sub[:, f] <= b
        left_idx, right_idx = node_idx[go_left], node_idx[~go_left]
        left_slot = builder.add_node(newton_value(left_idx))
        right_slot = builder.add_node(newton_value(right_idx))
        builder.set_split(slot, f, float(edges[f][b]), left_slot, right_slot)
        stack.append((right_idx, depth + 1, right_slot))
        stack.append((left_idx, depth + 1, left_slot))
    return builder.build()


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def train_gbt(X, y, cfg: GbtConfig, n_classes: int | None = None) -> GbtModel:
    """Softmax-objective boosting with one Newton regression tree per class per round.

    Per round: class probabilities from accumulated scores give gradients
    g = p - 1{y=c} and hessians h = p(1-p); a seeded uniform row subsample
    (without replacement) feeds the histogram tree grower; leaf values are
    -G/(H + reg) and scores accumulate with the learning rate.
    """
    X = np.asarray(X, dtype=np.float64)
    y, n_classes = _infer_classes(y, n_classes)
    n = len(y)
    edges = compute_bin_edges(X, cfg.n_bins)
    binned = bin_features(X, edges)
    rng = np.random.default_rng(cfg.seed)

    scores = np.zeros((n, n_classes))
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    model = GbtModel(trees=[], n_classes=n_classes, config=cfg, bin_edges=edges)

    for _ in range(cfg.n_rounds):
        probs = _softmax_rows(scores)
        model.train_loss.append(
            float(-np.log(np.clip(probs[np.arange(n), y], 1e-12, 1.0)).mean())
        )
        if cfg.row_subsample < 1.0:
            m = max(1, int(round(cfg.row_subsample * n)))
            sub = rng.permutation(n)[:m]
        else:
            sub = np.arange(n)
        round_trees = []
        for c in range(n_classes):
            g = probs[:, c] - onehot[:, c]
            h = probs[:, c] * (1.0 - probs[:, c])
            tree = _grow_hist_tree(binned, edges, g, h, sub, cfg.max_depth, cfg.reg_lambda)
            scores[:, c] += cfg.learning_rate * tree.predict_value(X)[:, 0]
            round_trees.append(tree)
        model.trees.append(round_trees)
    probs = _softmax_rows(scores)
    model.train_loss.append(
        float(-np.log(np.clip(probs[np.arange(n), y], 1e-12, 1.0)).mean())
    )
    return model


def predict_gbt(model: GbtModel, X) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    scores = np.zeros((len(X), model.n_classes))
    for round_trees in model.trees:
        for c, tree in enumerate(round_trees):
            scores[:, c] += model.config.learning_rate * tree.predict_value(X)[:, 0]
    probs = _softmax_rows(scores)
    return probs.argmax(axis=1), probs
