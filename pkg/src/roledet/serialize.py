"""Versioned little-endian binary serialization for trained models.

Magics: "MLP1" for a dense head, "MLE1" for a snapshot ensemble (a list of
embedded MLP1 blocks), "TRE1" for the tree models. All floats are 64-bit.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .neural import MlpHead, SnapshotEnsemble
from .trees import (
    AdaBoostConfig,
    AdaBoostModel,
    DecisionTree,
    ForestConfig,
    ForestModel,
    GbtConfig,
    GbtModel,
)

MLP_MAGIC = b"MLP1"
ENSEMBLE_MAGIC = b"MLE1"
TREE_MAGIC = b"TRE1"
_VERSION = 1

_KIND_FOREST = 1
_KIND_ADABOOST = 2
_KIND_GBT = 3


def _read(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated model file while reading {what}")
    return data


def _write_array(fh, arr: np.ndarray, dtype: str):
    fh.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def _read_array(fh, count: int, dtype: str, what: str) -> np.ndarray:
    size = np.dtype(dtype).itemsize * count
    return np.frombuffer(_read(fh, size, what), dtype=dtype).copy()


# ---------------------------------------------------------------------------
# MLP


def _mlp_bytes(head: MlpHead) -> bytes:
    import io

    buf = io.BytesIO()
    buf.write(MLP_MAGIC)
    dims = (head.input_dim, head.w1.shape[1], head.w2.shape[1], head.n_classes)
    buf.write(struct.pack("<IIIII", _VERSION, *dims))
    buf.write(struct.pack("<d", head.dropout_rate))
    for name in ("w1", "b1", "w2", "b2", "w3", "b3"):
        _write_array(buf, getattr(head, name), "<f8")
    return buf.getvalue()


def _mlp_from(fh) -> MlpHead:
    magic = _read(fh, 4, "magic")
    if magic != MLP_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MLP_MAGIC!r}")
    version, d, h1, h2, k = struct.unpack("<IIIII", _read(fh, 20, "dims"))
    if version != _VERSION:
        raise FormatError(f"unsupported MLP version {version}")
    (dropout,) = struct.unpack("<d", _read(fh, 8, "dropout"))
    shapes = [(d, h1), (h1,), (h1, h2), (h2,), (h2, k), (k,)]
    arrays = []
    for shape in shapes:
        flat = _read_array(fh, int(np.prod(shape)), "<f8", "parameters")
        arrays.append(flat.reshape(shape))
    return MlpHead(*arrays, dropout_rate=dropout)


def save_mlp(head: MlpHead, path: str | Path):
    Path(path).write_bytes(_mlp_bytes(head))


def load_mlp(path: str | Path) -> MlpHead:
    with open(path, "rb") as fh:
        head = _mlp_from(fh)
        if fh.read(1):
            raise FormatError("trailing bytes after MLP parameters")
    return head


def save_ensemble(ensemble: SnapshotEnsemble, path: str | Path):
    with open(path, "wb") as fh:
        fh.write(ENSEMBLE_MAGIC)
        fh.write(
            struct.pack("<IIII", _VERSION, len(ensemble.snapshots), ensemble.min_epoch, ensemble.interval)
        )
        for epoch, head in ensemble.snapshots:
            blob = _mlp_bytes(head)
            fh.write(struct.pack("<IQ", epoch, len(blob)))
            fh.write(blob)


def load_ensemble(path: str | Path) -> SnapshotEnsemble:
    import io

    with open(path, "rb") as fh:
        magic = _read(fh, 4, "magic")
        if magic != ENSEMBLE_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {ENSEMBLE_MAGIC!r}")
        version, count, min_epoch, interval = struct.unpack("<IIII", _read(fh, 16, "header"))
        if version != _VERSION:
            raise FormatError(f"unsupported ensemble version {version}")
        snapshots = []
        for i in range(count):
            epoch, size = struct.unpack("<IQ", _read(fh, 12, f"member {i} header"))
            blob = _read(fh, size, f"member {i}")
            snapshots.append((epoch, _mlp_from(io.BytesIO(blob))))
    return SnapshotEnsemble(snapshots=snapshots, min_epoch=min_epoch, interval=interval)


# ---------------------------------------------------------------------------
# Trees


def _write_tree(fh, tree: DecisionTree):
    n, cols = tree.value.shape
    fh.write(struct.pack("<II", n, cols))
    _write_array(fh, tree.feature, "<i4")
    _write_array(fh, tree.threshold, "<f8")
    _write_array(fh, tree.left, "<i4")
    _write_array(fh, tree.right, "<i4")
    _write_array(fh, tree.value, "<f8")


def _read_tree(fh) -> DecisionTree:
    n, cols = struct.unpack("<II", _read(fh, 8, "tree header"))
    return DecisionTree(
        feature=_read_array(fh, n, "<i4", "features"),
        threshold=_read_array(fh, n, "<f8", "thresholds"),
        left=_read_array(fh, n, "<i4", "left children"),
        right=_read_array(fh, n, "<i4", "right children"),
        value=_read_array(fh, n * cols, "<f8", "values").reshape(n, cols),
    )


def save_trees(model: ForestModel | AdaBoostModel | GbtModel, path: str | Path):
    with open(path, "wb") as fh:
        fh.write(TREE_MAGIC)
        if isinstance(model, ForestModel):
            fh.write(struct.pack("<IBI", _VERSION, _KIND_FOREST, model.n_classes))
            fh.write(struct.pack("<I", len(model.trees)))
            for tree in model.trees:
                _write_tree(fh, tree)
        elif isinstance(model, AdaBoostModel):
            fh.write(struct.pack("<IBI", _VERSION, _KIND_ADABOOST, model.n_classes))
            fh.write(struct.pack("<I", len(model.stumps)))
            _write_array(fh, np.asarray(model.alphas), "<f8")
            for stump in model.stumps:
                _write_tree(fh, stump)
        elif isinstance(model, GbtModel):
            fh.write(struct.pack("<IBI", _VERSION, _KIND_GBT, model.n_classes))
            fh.write(struct.pack("<Id", len(model.trees), model.config.learning_rate))
            for round_trees in model.trees:
                for tree in round_trees:
                    _write_tree(fh, tree)
        else:
            raise TypeError(f"cannot serialize {type(model).__name__}")


def load_trees(path: str | Path):
    with open(path, "rb") as fh:
        magic = _read(fh, 4, "magic")
        if magic != TREE_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {TREE_MAGIC!r}")
        version, kind, n_classes = struct.unpack("<IBI", _read(fh, 9, "header"))
        if version != _VERSION:
            raise FormatError(f"unsupported tree-model version {version}")
        if kind == _KIND_FOREST:
            (n_trees,) = struct.unpack("<I", _read(fh, 4, "tree count"))
            trees = [_read_tree(fh) for _ in range(n_trees)]
            return ForestModel(trees=trees, n_classes=n_classes, config=ForestConfig(n_trees=max(n_trees, 1)))
        if kind == _KIND_ADABOOST:
            (n_rounds,) = struct.unpack("<I", _read(fh, 4, "round count"))
            alphas = _read_array(fh, n_rounds, "<f8", "alphas").tolist()
            stumps = [_read_tree(fh) for _ in range(n_rounds)]
            return AdaBoostModel(
                stumps=stumps, alphas=alphas, n_classes=n_classes, config=AdaBoostConfig()
            )
        if kind == _KIND_GBT:
            n_rounds, lr = struct.unpack("<Id", _read(fh, 12, "gbt header"))
            trees = [[_read_tree(fh) for _ in range(n_classes)] for _ in range(n_rounds)]
            return GbtModel(
                trees=trees, n_classes=n_classes, config=GbtConfig(learning_rate=lr)
            )
        raise FormatError(f"unknown tree-model kind {kind}")


# ---------------------------------------------------------------------------
# Dispatch by magic


def save_model(model, path: str | Path):
    if isinstance(model, MlpHead):
        save_mlp(model, path)
    elif isinstance(model, SnapshotEnsemble):
        save_ensemble(model, path)
    else:
        save_trees(model, path)


def load_model(path: str | Path):
    try:
        with open(path, "rb") as fh:
            magic = fh.read(4)
    except OSError as exc:
        raise FormatError(f"cannot read model file {path}: {exc}") from exc
    if magic == MLP_MAGIC:
        return load_mlp(path)
    if magic == ENSEMBLE_MAGIC:
        return load_ensemble(path)
    if magic == TREE_MAGIC:
        return load_trees(path)
    raise FormatError(f"unrecognized model magic {magic!r}")
