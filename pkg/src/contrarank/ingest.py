"""Dataset file parsing and corpus statistics.

Canonical file format: UTF-8 text, one record per line, TAB-delimited,
4 fields (question_id, question, answer, label), no header. Lines starting
with ``#`` are comments; blank lines are ignored.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, TextIO

from .types import Label, QAPair, group_pairs, tokenize

log = logging.getLogger(__name__)


class ParseError(ValueError):
    """A malformed dataset line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


@dataclass(frozen=True)
class DatasetSchema:
    """How label fields are interpreted."""

    label_kind: str = "binary"  # "binary" | "graded"
    graded_threshold: int = 3
    delimiter: str = "\t"

    def __post_init__(self) -> None:
        if self.label_kind not in ("binary", "graded"):
            raise ValueError(f"unknown label_kind {self.label_kind!r}")
        if self.graded_threshold not in (1, 2, 3, 4):
            raise ValueError("graded_threshold must be in 1..4")
        if len(self.delimiter) != 1:
            raise ValueError("delimiter must be a single character")


@dataclass(frozen=True)
class DatasetStats:
    n_questions: int
    n_pairs: int
    pct_positive: float
    n_questions_with_positive: int

    def as_dict(self) -> dict:
        return {
            "n_questions": self.n_questions,
            "n_pairs": self.n_pairs,
            "pct_positive": self.pct_positive,
            "n_questions_with_positive": self.n_questions_with_positive,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    def to_table(self) -> str:
        rows = [
            ("questions", str(self.n_questions)),
            ("qa pairs", str(self.n_pairs)),
            ("% positive", f"{self.pct_positive:.2f}"),
            ("questions with positive", str(self.n_questions_with_positive)),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def _parse_label(raw: str, schema: DatasetSchema, line_no: int) -> Label:
    try:
        value = int(raw)
    except ValueError:
        raise ParseError(line_no, f"label {raw!r} is not an integer") from None
    if schema.label_kind == "binary":
        if value not in (0, 1):
            raise ParseError(line_no, f"binary label must be 0 or 1, got {value}")
        return Label(binary=value)
    if value not in range(5):
        raise ParseError(line_no, f"graded label must be in 0..4, got {value}")
    return Label.from_graded(value, threshold=schema.graded_threshold)


def parse_dataset(stream: Iterable[str] | TextIO, schema: DatasetSchema | None = None) -> list[QAPair]:
    """Parse a line-oriented dataset into QA pairs, in file order.

    Duplicate (question_id, answer) lines are kept with a warning: raw
    distributions contain such noise and dropping them would change the
    corpus statistics.
    """
    schema = schema or DatasetSchema()
    pairs: list[QAPair] = []
    seen: set[tuple[str, str]] = set()
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split(schema.delimiter)
        if len(fields) != 4:
            raise ParseError(line_no, f"expected 4 fields, got {len(fields)}")
        qid, question_raw, answer_raw, label_raw = fields
        if not qid:
            raise ParseError(line_no, "empty question_id")
        question = tokenize(question_raw)
        answer = tokenize(answer_raw)
        if question.is_empty:
            raise ParseError(line_no, "question text is empty after tokenization")
        if answer.is_empty:
            raise ParseError(line_no, "answer text is empty after tokenization")
        label = _parse_label(label_raw, schema, line_no)
        key = (qid, answer_raw)
        if key in seen:
            log.warning("line %d: duplicate (question_id, answer) %r; keeping both", line_no, key)
        seen.add(key)
        pairs.append(QAPair(question_id=qid, question=question, answer=answer, label=label))
    return pairs


def serialize_dataset(pairs: list[QAPair], schema: DatasetSchema | None = None) -> str:
    """Inverse of parse_dataset for well-formed pairs (round-trip identity)."""
    schema = schema or DatasetSchema()
    lines = []
    for pair in pairs:
        if schema.label_kind == "graded":
            if pair.label.graded is None:
                raise ValueError(f"pair {pair.question_id!r} has no graded label")
            label_field = str(pair.label.graded)
        else:
            label_field = str(pair.label.binary)
        lines.append(
            schema.delimiter.join(
                (pair.question_id, pair.question.raw, pair.answer.raw, label_field)
            )
        )
    return "".join(line + "\n" for line in lines)


def compute_stats(pairs: list[QAPair]) -> DatasetStats:
    """Corpus summary: question/pair counts, positive rate, positive coverage."""
    if not pairs:
        raise ValueError("compute_stats requires at least one pair")
    groups = group_pairs(pairs)
    n_pos = sum(1 for p in pairs if p.label.binary == 1)
    return DatasetStats(
        n_questions=len(groups),
        n_pairs=len(pairs),
        pct_positive=100.0 * n_pos / len(pairs),
        n_questions_with_positive=sum(1 for g in groups if g.positives),
    )
