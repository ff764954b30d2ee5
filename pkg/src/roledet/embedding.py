"""Embedding providers, the binary interchange format, and target/context fusion.

Vectors come either from the built-in hashing embedder (no model required,
fully deterministic) or from a precomputed table written by an external
encoder. Tables are keyed by comment id (``pair_id:q`` / ``pair_id:a``).
"""

from __future__ import annotations

import hashlib
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

_TOKEN_RE = re.compile(r"\w+")

INTERCHANGE_MAGIC = b"CTE1"
INTERCHANGE_VERSION = 1


def tokenize_baseline(text: str) -> list[str]:
    """Lowercase and split into maximal word-character runs."""
    return _TOKEN_RE.findall(text.lower())


def _hash64(feature: str, key: bytes) -> int:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


def hash_embed(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Signed feature hashing of word unigrams and char 3-5-grams, L2 normalized.

    Bucket and sign come from a keyed 64-bit BLAKE2b hash (sign from the
    parity bit, bucket from the remaining bits), so vectors are identical
    across platforms for a given (text, dim, seed). Empty feature sets give
    the zero vector.
    """
    if dim < 8:
        raise ValueError(f"dim must be >= 8, got {dim}")
    key = struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF)
    vec = np.zeros(dim, dtype=np.float64)

    lowered = text.lower()
    features: list[str] = ["w\x00" + tok for tok in _TOKEN_RE.findall(lowered)]
    for n in (3, 4, 5):
        prefix = f"{n}\x00"
        features.extend(prefix + lowered[i : i + n] for i in range(len(lowered) - n + 1))

    for feat in features:
        h = _hash64(feat, key)
        sign = 1.0 if h & 1 else -1.0
        vec[(h >> 1) % dim] += sign

    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


@dataclass(frozen=True)
class FusionConfig:
    """Weight of the context vector in the fused input."""

    context_weight: float = 0.5


def fuse(target: np.ndarray, context: np.ndarray, cfg: FusionConfig) -> np.ndarray:
    """target + context_weight * context, elementwise."""
    target = np.asarray(target, dtype=np.float64)
    context = np.asarray(context, dtype=np.float64)
    if target.shape != context.shape:
        raise ValueError(f"dimension mismatch: {target.shape} vs {context.shape}")
    return target + cfg.context_weight * context


@dataclass
class EmbeddingTable:
    dim: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: str = ""

    def __len__(self) -> int:
        return len(self.entries)


def write_embedding_table(table: EmbeddingTable, path: str | Path) -> None:
    """Write the little-endian CTE1 interchange file; vectors stored as float32."""
    path = Path(path)
    meta = table.metadata.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(INTERCHANGE_MAGIC)
        fh.write(struct.pack("<IIQ", INTERCHANGE_VERSION, table.dim, len(table.entries)))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        for comment_id, vec in table.entries.items():
            values = np.asarray(vec, dtype="<f4")
            if values.shape != (table.dim,):
                raise ValueError(
                    f"vector for '{comment_id}' has shape {values.shape}, expected ({table.dim},)"
                )
            id_bytes = comment_id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise ValueError(f"comment id too long: {comment_id[:32]}...")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(values.tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated embedding file while reading {what}")
    return data


def load_embedding_table(path: str | Path) -> EmbeddingTable:
    """Load a CTE1 file; values are preserved bit-exactly as float32."""
    path = Path(path)
    try:
        fh_test = open(path, "rb")
        fh_test.close()
    except OSError as exc:
        raise FormatError(f"cannot read embedding file {path}: {exc}") from exc
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != INTERCHANGE_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {INTERCHANGE_MAGIC!r}")
        version, dim, count = struct.unpack("<IIQ", _read_exact(fh, 16, "header"))
        if version != INTERCHANGE_VERSION:
            raise FormatError(f"unsupported version {version}")
        (meta_len,) = struct.unpack("<I", _read_exact(fh, 4, "metadata length"))
        metadata = _read_exact(fh, meta_len, "metadata").decode("utf-8")
        entries: dict[str, np.ndarray] = {}
        for i in range(count):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2, f"record {i} id length"))
            comment_id = _read_exact(fh, id_len, f"record {i} id").decode("utf-8")
            raw = _read_exact(fh, 4 * dim, f"record {i} values")
            if comment_id in entries:
                raise FormatError(f"duplicate comment id '{comment_id}'")
            entries[comment_id] = np.frombuffer(raw, dtype="<f4").copy()
        if fh.read(1):
            raise FormatError("trailing bytes after last record")
    return EmbeddingTable(dim=dim, entries=entries, metadata=metadata)


def baseline_table(comment_texts: dict[str, str], dim: int, seed: int = 0) -> EmbeddingTable:
    """Embed each comment with hash_embed; keys are comment ids."""
    entries = {cid: hash_embed(text, dim, seed) for cid, text in comment_texts.items()}
    return EmbeddingTable(dim=dim, entries=entries, metadata="provider=baseline")
