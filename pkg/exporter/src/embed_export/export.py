"""Batch-encode every comment of a Q&A corpus and write the interchange file.

The corpus is the pipeline's JSON-lines format (pair_id, question, answer,
q_role, a_role); each comment is embedded separately and keyed as
``pair_id:q`` / ``pair_id:a``. Output is the little-endian "CTE1" binary
format the pipeline loads, with float32 vectors and a JSON metadata field
recording model id, pooling, and max length.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

INTERCHANGE_MAGIC = b"CTE1"
INTERCHANGE_VERSION = 1

POOLINGS = ("first-token", "mean")


class ExportError(Exception):
    """Corpus, model, or configuration problem during export."""


@dataclass
class ExportConfig:
    corpus: str
    model: str
    output: str
    pooling: str = "first-token"
    max_length: int | str = "p99"
    batch_size: int = 32

    def __post_init__(self):
        if self.pooling not in POOLINGS:
            raise ExportError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if isinstance(self.max_length, str) and self.max_length != "p99":
            raise ExportError("max_length must be an integer or 'p99'")
        if isinstance(self.max_length, int) and self.max_length < 1:
            raise ExportError("max_length must be >= 1")
        if self.batch_size < 1:
            raise ExportError("batch_size must be >= 1")


def read_corpus(path: str | Path) -> list[tuple[str, str]]:
    """(comment_id, text) pairs in corpus order: pair_id:q, pair_id:a per line."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ExportError(f"cannot read corpus {path}: {exc}") from exc
    comments: list[tuple[str, str]] = []
    seen: set[str] = set()
    for line_no, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ExportError(f"corpus line {line_no}: invalid JSON ({exc.msg})") from exc
        for key in ("pair_id", "question", "answer"):
            if key not in record:
                raise ExportError(f"corpus line {line_no}: missing field '{key}'")
        pair_id = record["pair_id"]
        if pair_id in seen:
            raise ExportError(f"corpus line {line_no}: duplicate pair_id '{pair_id}'")
        seen.add(pair_id)
        comments.append((f"{pair_id}:q", record["question"]))
        comments.append((f"{pair_id}:a", record["answer"]))
    if not comments:
        raise ExportError(f"corpus {path} contains no records")
    return comments


def _load_model(identifier: str):
    import torch
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(identifier)
        model = AutoModel.from_pretrained(identifier)
    except Exception as exc:
        raise ExportError(f"cannot load model '{identifier}': {exc}") from exc
    if getattr(model.config, "is_encoder_decoder", False):
        model = model.get_encoder()
    if tokenizer.pad_token is None:
        # GPT-2-style tokenizers have no pad token; padding positions are
        # excluded through the attention mask either way
        tokenizer.pad_token = tokenizer.eos_token or tokenizer.unk_token
    model.eval()
    torch.set_grad_enabled(False)
    return tokenizer, model


def percentile_ceil(lengths: list[int], q: float = 99.0) -> int:
    """Ceil of the linear-interpolation percentile, matching the pipeline's rule."""
    return int(math.ceil(float(np.percentile(np.asarray(lengths, dtype=np.float64), q))))


def resolve_max_length(cfg: ExportConfig, tokenizer, texts: list[str]) -> int:
    if isinstance(cfg.max_length, int):
        return cfg.max_length
    lengths = [len(tokenizer.encode(t, truncation=False)) for t in texts]
    max_length = percentile_ceil(lengths, 99.0)
    limit = getattr(tokenizer, "model_max_length", None)
    if limit is not None and limit < 1_000_000:
        max_length = min(max_length, int(limit))
    return max(max_length, 2)


def _pool(hidden, attention_mask, pooling: str) -> np.ndarray:
    if pooling == "first-token":
        return hidden[:, 0, :].cpu().numpy()
    mask = attention_mask.unsqueeze(-1).to(hidden.dtype)
    summed = (hidden * mask).sum(dim=1)
    counts = mask.sum(dim=1).clamp(min=1.0)
    return (summed / counts).cpu().numpy()


def encode_comments(cfg: ExportConfig, comments: list[tuple[str, str]]):
    """Embed every comment; returns (vectors float32 [n, dim], max_length used)."""
    tokenizer, model = _load_model(cfg.model)
    texts = [text for _, text in comments]
    max_length = resolve_max_length(cfg, tokenizer, texts)
    rows = []
    for start in range(0, len(texts), cfg.batch_size):
        batch = texts[start : start + cfg.batch_size]
        encoded = tokenizer(
            batch,
            padding="max_length",
            truncation=True,
            max_length=max_length,
            return_tensors="pt",
        )
        outputs = model(**encoded)
        rows.append(_pool(outputs.last_hidden_state, encoded["attention_mask"], cfg.pooling))
    vectors = np.vstack(rows).astype("<f4")
    return vectors, max_length


def write_interchange(path: str | Path, ids: list[str], vectors: np.ndarray, metadata: str):
    dim = vectors.shape[1]
    meta = metadata.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(INTERCHANGE_MAGIC)
        fh.write(struct.pack("<IIQ", INTERCHANGE_VERSION, dim, len(ids)))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        for comment_id, vec in zip(ids, vectors):
            id_bytes = comment_id.encode("utf-8")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(np.ascontiguousarray(vec, dtype="<f4").tobytes())


def export(cfg: ExportConfig) -> dict:
    """Run the export; returns a small summary (records, dim, max_length)."""
    comments = read_corpus(cfg.corpus)
    vectors, max_length = encode_comments(cfg, comments)
    metadata = json.dumps(
        {"model": cfg.model, "pooling": cfg.pooling, "max_length": max_length},
        sort_keys=True,
    )
    write_interchange(cfg.output, [cid for cid, _ in comments], vectors, metadata)
    return {
        "records": len(comments),
        "dim": int(vectors.shape[1]),
        "max_length": max_length,
        "output": str(cfg.output),
    }
