"""Shared immutable domain types: texts, labels, QA pairs, groups, rankings."""

from __future__ import annotations

from dataclasses import dataclass, field


class DataConsistencyError(ValueError):
    """Raised when input records contradict each other (e.g. one question id
    carrying two different question texts)."""


# Characters mapped to spaces before whitespace splitting. Fixed set; changing
# it invalidates every committed fixture and frozen regression value.
_PUNCT = '.,!?;:"\'()[]'
_PUNCT_TABLE = str.maketrans({c: " " for c in _PUNCT})


@dataclass(frozen=True)
class Text:
    """A piece of text plus its deterministic tokenization.

    ``tokens`` is always exactly ``tokenize(raw).tokens``; construct via
    :func:`tokenize` rather than directly.
    """

    raw: str
    tokens: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def is_empty(self) -> bool:
        return not self.tokens


def tokenize(raw: str) -> Text:
    """Lowercase, map punctuation to spaces, split on whitespace.

    Whitespace-only input yields an empty-token Text; callers that require
    non-empty text must reject it.
    """
    tokens = tuple(raw.lower().translate(_PUNCT_TABLE).split())
    return Text(raw=raw, tokens=tokens)


def truncate_text(text: Text, max_tokens: int) -> Text:
    """Clip to the first ``max_tokens`` tokens, rebuilding a consistent raw."""
    if len(text.tokens) <= max_tokens:
        return text
    kept = text.tokens[:max_tokens]
    return Text(raw=" ".join(kept), tokens=kept)


@dataclass(frozen=True)
class Label:
    """Binary relevance, optionally backed by a graded judgment in 0..4."""

    binary: int
    graded: int | None = None

    def __post_init__(self) -> None:
        if self.binary not in (0, 1):
            raise ValueError(f"binary label must be 0 or 1, got {self.binary}")
        if self.graded is not None and self.graded not in range(5):
            raise ValueError(f"graded label must be in 0..4, got {self.graded}")

    @classmethod
    def from_graded(cls, graded: int, threshold: int = 3) -> "Label":
        """Binarize a graded judgment: relevant iff ``graded >= threshold``."""
        return cls(binary=1 if graded >= threshold else 0, graded=graded)


@dataclass(frozen=True)
class QAPair:
    """One question/answer pair with its relevance label."""

    question_id: str
    question: Text
    answer: Text
    label: Label

    def __post_init__(self) -> None:
        if not self.question_id:
            raise ValueError("question_id must be non-empty")


@dataclass(frozen=True)
class QuestionGroup:
    """A question with its relevant and irrelevant answer sets.

    The unit of pairwise and contrastive training. ``positives`` may be
    empty; such questions carry no conventional pairwise signal.
    """

    question_id: str
    question: Text
    positives: tuple[Text, ...]
    negatives: tuple[Text, ...]

    @property
    def n_answers(self) -> int:
        return len(self.positives) + len(self.negatives)

    def candidates(self) -> tuple[Text, ...]:
        """Canonical candidate order: positives first, then negatives."""
        return self.positives + self.negatives


@dataclass(frozen=True)
class AugmentedGroup:
    """A QuestionGroup plus synthesized pseudo-positive texts.

    ``synth_questions`` pairs each generated question with the index of the
    negative answer it was generated from; when question generation ran and
    succeeded it has exactly one entry per negative, in order.
    """

    base: QuestionGroup
    synth_answer: Text | None = None
    synth_questions: tuple[tuple[int, Text], ...] = field(default=())

    @property
    def has_synthesis(self) -> bool:
        return self.synth_answer is not None or bool(self.synth_questions)


@dataclass(frozen=True)
class RankedList:
    """Scored candidates for one query, sorted for metric computation.

    Ordering is descending by score; equal scores keep their original
    candidate order, so rankings are deterministic.
    """

    query_id: str
    entries: tuple[tuple[float, Label], ...]

    @classmethod
    def from_scores(cls, query_id: str, scored: list[tuple[float, Label]]) -> "RankedList":
        order = sorted(range(len(scored)), key=lambda i: -scored[i][0])
        return cls(query_id=query_id, entries=tuple(scored[i] for i in order))


def group_pairs(pairs: list[QAPair]) -> list[QuestionGroup]:
    """Partition QA pairs into per-question groups by binary label.

    Groups appear in first-seen question order; answers keep file order
    within each group. A question id seen with two different question texts
    is a data-consistency error.
    """
    if not pairs:
        raise ValueError("group_pairs requires at least one pair")
    order: list[str] = []
    questions: dict[str, Text] = {}
    positives: dict[str, list[Text]] = {}
    negatives: dict[str, list[Text]] = {}
    for pair in pairs:
        qid = pair.question_id
        if qid not in questions:
            order.append(qid)
            questions[qid] = pair.question
            positives[qid] = []
            negatives[qid] = []
        elif questions[qid].raw != pair.question.raw:
            raise DataConsistencyError(
                f"question_id {qid!r} has conflicting question texts: "
                f"{questions[qid].raw!r} vs {pair.question.raw!r}"
            )
        if pair.label.binary == 1:
            positives[qid].append(pair.answer)
        else:
            negatives[qid].append(pair.answer)
    return [
        QuestionGroup(
            question_id=qid,
            question=questions[qid],
            positives=tuple(positives[qid]),
            negatives=tuple(negatives[qid]),
        )
        for qid in order
    ]
