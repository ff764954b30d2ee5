"""Dense classification head: two ReLU layers, softmax output, snapshot ensembling.

The head is trained with mini-batch Adam, inverted dropout on the hidden
activations, L2 on the dense weights (not biases), and early stopping on
validation cross-entropy. Parameter snapshots taken late in training at a
fixed epoch interval form the snapshot ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")


@dataclass
class MlpHead:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    dropout_rate: float = 0.3

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.w3.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "MlpHead":
        return MlpHead(
            **{name: getattr(self, name).copy() for name in PARAM_NAMES},
            dropout_rate=self.dropout_rate,
        )


@dataclass(frozen=True)
class TrainConfig:
    l2_strength: float = 0.09
    dropout_rate: float = 0.3
    patience_epochs: int = 40
    learning_rate: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 1000
    val_fraction: float = 0.1
    seed: int = 0
    hidden_sizes: tuple[int, int] = (2048, 1024)
    snapshot_min_epoch: int = 275
    snapshot_interval: int = 5

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.patience_epochs < 1:
            raise ValueError("patience_epochs must be >= 1")


@dataclass
class TrainLog:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0


@dataclass
class SnapshotEnsemble:
    """Parameter snapshots (epoch, head), epochs >= min_epoch spaced by interval."""

    snapshots: list[tuple[int, MlpHead]]
    min_epoch: int
    interval: int

    def __len__(self) -> int:
        return len(self.snapshots)


def init_mlp(
    input_dim: int,
    seed: int,
    hidden_sizes: tuple[int, int] = (2048, 1024),
    n_classes: int = 5,
    dropout_rate: float = 0.3,
) -> MlpHead:
    """Fan-in-scaled uniform weights, zero biases, deterministic per seed."""
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    rng = np.random.default_rng(seed)
    h1, h2 = hidden_sizes

    def layer(fan_in, fan_out):
        limit = np.sqrt(6.0 / fan_in)
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return MlpHead(
        w1=layer(input_dim, h1),
        b1=np.zeros(h1),
        w2=layer(h1, h2),
        b2=np.zeros(h2),
        w3=layer(h2, n_classes),
        b3=np.zeros(n_classes),
        dropout_rate=dropout_rate,
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def forward(
    head: MlpHead,
    X: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | int | None = None,
) -> np.ndarray:
    """Class-probability rows. Dropout masks are applied only in train mode."""
    probs, _ = _forward_full(head, X, train_mode=train_mode, rng=rng)
    return probs


def _dropout_masks(head: MlpHead, shapes, rng) -> tuple[np.ndarray, np.ndarray]:
    p = head.dropout_rate
    if p == 0.0:
        return np.ones(shapes[0]), np.ones(shapes[1])
    keep = 1.0 - p
    m1 = (rng.random(shapes[0]) >= p) / keep
    m2 = (rng.random(shapes[1]) >= p) / keep
    return m1, m2


def _forward_full(head, X, train_mode=False, rng=None, masks=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != head.input_dim:
        raise ValueError(f"input dim {X.shape[1]} != head input dim {head.input_dim}")

    z1 = X @ head.w1 + head.b1
    a1 = np.maximum(z1, 0.0)
    if train_mode and masks is None:
        if rng is None:
            raise ValueError("train-mode forward needs an rng or seed")
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        masks = _dropout_masks(head, ((X.shape[0], a1.shape[1]), (X.shape[0], head.w2.shape[1])), rng)
    if masks is not None:
        a1 = a1 * masks[0]
    z2 = a1 @ head.w2 + head.b2
    a2 = np.maximum(z2, 0.0)
    if masks is not None:
        a2 = a2 * masks[1]
    logits = a2 @ head.w3 + head.b3
    probs = _softmax(logits)
    cache = (X, z1, a1, z2, a2, masks)
    return probs, cache


def cross_entropy(probs: np.ndarray, y: np.ndarray) -> float:
    """Mean categorical cross-entropy with probabilities clamped to [1e-12, 1]."""
    clipped = np.clip(probs[np.arange(len(y)), y], 1e-12, 1.0)
    return float(-np.log(clipped).mean())


def _l2_penalty(head: MlpHead) -> float:
    return float((head.w1**2).sum() + (head.w2**2).sum() + (head.w3**2).sum())


def _backward(head, cache, probs, y, l2_strength):
    X, z1, a1, z2, a2, masks = cache
    n = len(y)
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grads = {}
    grads["w3"] = a2.T @ delta + 2.0 * l2_strength * head.w3
    grads["b3"] = delta.sum(axis=0)
    d2 = delta @ head.w3.T
    if masks is not None:
        d2 = d2 * masks[1]
    d2[z2 <= 0.0] = 0.0
    grads["w2"] = a1.T @ d2 + 2.0 * l2_strength * head.w2
    grads["b2"] = d2.sum(axis=0)
    d1 = d2 @ head.w2.T
    if masks is not None:
        d1 = d1 * masks[0]
    d1[z1 <= 0.0] = 0.0
    grads["w1"] = X.T @ d1 + 2.0 * l2_strength * head.w1
    grads["b1"] = d1.sum(axis=0)
    return grads


def loss_and_grad(
    head: MlpHead, X: np.ndarray, y: np.ndarray, l2_strength: float
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy plus l2_strength * sum of squared dense weights, with exact gradients.

    Dropout is never applied here; this is the deterministic objective used
    for gradient verification and validation scoring.
    """
    y = np.asarray(y, dtype=np.int64)
    probs, cache = _forward_full(head, X)
    loss = cross_entropy(probs, y) + l2_strength * _l2_penalty(head)
    grads = _backward(head, cache, probs, y, l2_strength)
    return loss, grads


def train(
    head: MlpHead,
    train_set: tuple[np.ndarray, np.ndarray],
    val_set: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
) -> tuple[MlpHead, TrainLog, SnapshotEnsemble]:
    """Mini-batch Adam with early stopping on validation cross-entropy.

    Stops once validation loss has not reached a new minimum for
    `patience_epochs` consecutive epochs (or at max_epochs); the returned
    head carries the parameters from the best epoch. Snapshots are captured
    at epochs min_epoch, min_epoch+interval, ... until the stop; if training
    stops before the first snapshot epoch the ensemble degenerates to the
    best head alone.
    """
    X_train, y_train = np.asarray(train_set[0], dtype=np.float64), np.asarray(train_set[1])
    X_val, y_val = np.asarray(val_set[0], dtype=np.float64), np.asarray(val_set[1])
    if len(X_train) == 0 or len(X_val) == 0:
        raise ValueError("train and validation sets must be non-empty")
    y_train = y_train.astype(np.int64)
    y_val = y_val.astype(np.int64)

    head = head.copy()
    head.dropout_rate = cfg.dropout_rate
    rng = np.random.default_rng(cfg.seed)

    adam_m = {k: np.zeros_like(v) for k, v in head.params().items()}
    adam_v = {k: np.zeros_like(v) for k, v in head.params().items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    log = TrainLog()
    best_val = np.inf
    best_params = head.copy()
    best_epoch = 0
    since_best = 0
    snapshots: list[tuple[int, MlpHead]] = []

    n = len(X_train)
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            Xb, yb = X_train[batch], y_train[batch]
            probs, cache = _forward_full(head, Xb, train_mode=cfg.dropout_rate > 0, rng=rng)
            loss = cross_entropy(probs, yb) + cfg.l2_strength * _l2_penalty(head)
            grads = _backward(head, cache, probs, yb, cfg.l2_strength)
            epoch_loss += loss * len(batch)
            step += 1
            for name, grad in grads.items():
                adam_m[name] = beta1 * adam_m[name] + (1 - beta1) * grad
                adam_v[name] = beta2 * adam_v[name] + (1 - beta2) * grad**2
                m_hat = adam_m[name] / (1 - beta1**step)
                v_hat = adam_v[name] / (1 - beta2**step)
                getattr(head, name)[...] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)

        log.train_loss.append(epoch_loss / n)
        val_probs = forward(head, X_val)
        val_loss = cross_entropy(val_probs, y_val)
        log.val_loss.append(val_loss)

        if val_loss < best_val:
            best_val = val_loss
            best_params = head.copy()
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1

        if epoch >= cfg.snapshot_min_epoch and (epoch - cfg.snapshot_min_epoch) % cfg.snapshot_interval == 0:
            snapshots.append((epoch, head.copy()))

        if since_best >= cfg.patience_epochs:
            break

    log.best_epoch = best_epoch
    log.stopped_epoch = len(log.val_loss)
    if not snapshots:
        snapshots = [(best_epoch, best_params.copy())]
    ensemble = SnapshotEnsemble(
        snapshots=snapshots,
        min_epoch=cfg.snapshot_min_epoch,
        interval=cfg.snapshot_interval,
    )
    return best_params, log, ensemble


def ensemble_predict(
    ensemble: SnapshotEnsemble, X: np.ndarray, combine: str = "mean"
) -> np.ndarray:
    """Combine member outputs: mean of softmax rows, or majority vote shares."""
    if len(ensemble.snapshots) == 0:
        raise ValueError("empty ensemble")
    if combine == "mean":
        total = None
        for _, member in ensemble.snapshots:
            probs = forward(member, X)
            total = probs if total is None else total + probs
        return total / len(ensemble.snapshots)
    if combine == "vote":
        n_classes = ensemble.snapshots[0][1].n_classes
        votes = np.zeros((len(X), n_classes))
        for _, member in ensemble.snapshots:
            picked = forward(member, X).argmax(axis=1)
            votes[np.arange(len(X)), picked] += 1.0
        return votes / len(ensemble.snapshots)
    raise ValueError(f"unknown combine rule {combine!r}")
