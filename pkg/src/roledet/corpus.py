"""Q&A corpus ingestion and directed context-target sample construction.

A corpus is a UTF-8 JSON-lines file, one object per line with keys
``pair_id`` (str), ``question`` (str), ``answer`` (str), ``q_role`` (int),
``a_role`` (int). Each Q&A pair yields two directed samples: one classifies
the question with the answer as context, the other the reverse.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import CorpusError

QUESTION_AS_TARGET = "question-as-target"
ANSWER_AS_TARGET = "answer-as-target"


class Role(IntEnum):
    HARASSER = 0
    VICTIM = 1
    BYSTANDER_DEFENDER = 2
    BYSTANDER_ASSISTANT = 3
    BYSTANDER_OTHER = 4


ROLE_NAMES = (
    "harasser",
    "victim",
    "bystander-defender",
    "bystander-assistant",
    "bystander-other",
)

N_ROLES = len(ROLE_NAMES)


@dataclass(frozen=True)
class QAPair:
    pair_id: str
    question: str
    answer: str
    q_role: int
    a_role: int


@dataclass(frozen=True)
class ContextTargetSample:
    """One directed (target, context) comment pair labelled with the target's role."""

    pair_id: str
    target_text: str
    context_text: str
    label: int
    direction: str

    @property
    def target_id(self) -> str:
        suffix = ":q" if self.direction == QUESTION_AS_TARGET else ":a"
        return self.pair_id + suffix

    @property
    def context_id(self) -> str:
        suffix = ":a" if self.direction == QUESTION_AS_TARGET else ":q"
        return self.pair_id + suffix

    @property
    def sample_id(self) -> str:
        return self.target_id


def _check_role(value, field: str, line_no: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise CorpusError(f"line {line_no}: {field} must be an integer, got {value!r}")
    if not 0 <= value < N_ROLES:
        raise CorpusError(f"line {line_no}: {field}={value} outside [0, {N_ROLES - 1}]")
    return value


def parse_corpus(source: str | Path | Iterable[str]) -> list[QAPair]:
    """Parse a JSON-lines corpus from a path or an iterable of lines.

    Raises CorpusError naming the offending line for malformed JSON, missing
    or mistyped fields, out-of-range roles, and duplicate pair ids. Blank
    lines are skipped.
    """
    if isinstance(source, (str, Path)):
        try:
            lines: Iterable[str] = Path(source).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise CorpusError(f"cannot read corpus file {source}: {exc}") from exc
    else:
        lines = source

    pairs: list[QAPair] = []
    seen: set[str] = set()
    for line_no, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
        if not isinstance(record, dict):
            raise CorpusError(f"line {line_no}: record must be a JSON object")
        for key in ("pair_id", "question", "answer", "q_role", "a_role"):
            if key not in record:
                raise CorpusError(f"line {line_no}: missing field '{key}'")
        pair_id = record["pair_id"]
        if not isinstance(pair_id, str) or not pair_id:
            raise CorpusError(f"line {line_no}: pair_id must be a non-empty string")
        if pair_id in seen:
            raise CorpusError(f"line {line_no}: duplicate pair_id '{pair_id}'")
        seen.add(pair_id)
        for key in ("question", "answer"):
            if not isinstance(record[key], str):
                raise CorpusError(f"line {line_no}: {key} must be a string")
        pairs.append(
            QAPair(
                pair_id=pair_id,
                question=record["question"],
                answer=record["answer"],
                q_role=_check_role(record["q_role"], "q_role", line_no),
                a_role=_check_role(record["a_role"], "a_role", line_no),
            )
        )
    return pairs


def to_context_target(pairs: Sequence[QAPair]) -> list[ContextTargetSample]:
    """Double the corpus: each pair yields a question-as-target and an answer-as-target sample."""
    samples: list[ContextTargetSample] = []
    for pair in pairs:
        samples.append(
            ContextTargetSample(
                pair_id=pair.pair_id,
                target_text=pair.question,
                context_text=pair.answer,
                label=pair.q_role,
                direction=QUESTION_AS_TARGET,
            )
        )
        samples.append(
            ContextTargetSample(
                pair_id=pair.pair_id,
                target_text=pair.answer,
                context_text=pair.question,
                label=pair.a_role,
                direction=ANSWER_AS_TARGET,
            )
        )
    return samples


def subsample_class(
    samples: Sequence[ContextTargetSample],
    label: int,
    cap: int,
    seed: int,
    unit: str = "samples",
) -> list[ContextTargetSample]:
    """Reduce one class to at most ``cap`` members by seeded uniform sampling.

    Samples of every other label are kept untouched and input order is
    preserved. With ``unit="samples"`` the cap counts directed samples; with
    ``unit="pairs"`` it counts distinct pair ids carrying the label, and all
    labelled samples of a dropped pair are removed together.
    """
    if cap < 0:
        raise ValueError("cap must be >= 0")
    if unit not in ("samples", "pairs"):
        raise ValueError(f"unknown subsample unit {unit!r}")
    rng = np.random.default_rng(seed)

    if unit == "samples":
        positions = [i for i, s in enumerate(samples) if s.label == label]
        if len(positions) <= cap:
            return list(samples)
        # Fisher-Yates prefix: keep the first `cap` entries of a seeded permutation
        perm = rng.permutation(len(positions))
        keep = {positions[j] for j in perm[:cap]}
        return [s for i, s in enumerate(samples) if s.label != label or i in keep]

    pair_ids = sorted({s.pair_id for s in samples if s.label == label})
    if len(pair_ids) <= cap:
        return list(samples)
    perm = rng.permutation(len(pair_ids))
    keep_pairs = {pair_ids[j] for j in perm[:cap]}
    return [s for s in samples if s.label != label or s.pair_id in keep_pairs]


@dataclass(frozen=True)
class ClassRow:
    count: int
    share: float
    median_tokens: float
    p99_tokens: int


@dataclass(frozen=True)
class ClassStats:
    per_class: dict[int, ClassRow]
    total: int

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "per_class": {
                str(label): {
                    "name": ROLE_NAMES[label],
                    "count": row.count,
                    "share": row.share,
                    "median_tokens": row.median_tokens,
                    "p99_tokens": row.p99_tokens,
                }
                for label, row in sorted(self.per_class.items())
            },
        }


def percentile_interpolated(values: Sequence[float], q: float) -> float:
    """Linear-interpolation percentile at rank 0.01*q*(n-1) over sorted values."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("percentile of empty sequence")
    return float(np.percentile(arr, q))


def class_stats(
    samples: Sequence[ContextTargetSample],
    tokenizer: Callable[[str], Sequence[str]],
) -> ClassStats:
    """Per-class counts, shares, and median / ceil(99th-percentile) target token lengths.

    Roles absent from ``samples`` get count 0 and zero length statistics.
    """
    if not samples:
        raise ValueError("class_stats requires at least one sample")
    lengths: dict[int, list[int]] = {label: [] for label in range(N_ROLES)}
    for s in samples:
        lengths[s.label].append(len(tokenizer(s.target_text)))
    total = len(samples)
    per_class: dict[int, ClassRow] = {}
    for label in range(N_ROLES):
        vals = lengths[label]
        if vals:
            median = percentile_interpolated(vals, 50)
            p99 = int(math.ceil(percentile_interpolated(vals, 99)))
        else:
            median, p99 = 0.0, 0
        per_class[label] = ClassRow(
            count=len(vals),
            share=len(vals) / total,
            median_tokens=median,
            p99_tokens=p99,
        )
    return ClassStats(per_class=per_class, total=total)
