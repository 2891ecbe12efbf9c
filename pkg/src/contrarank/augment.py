"""Generation-based data augmentation: fine-tuning corpora built from
positive pairs, synthesis of pseudo-positive questions/answers through a
pluggable generator, and an on-disk cache for synthesized groups.

Generators produce a question for a given answer (question mode) or an
answer for a given question (answer mode). Three implementations ship:

    StubGenerator    deterministic template output, keeps every pipeline
                     and loss path exercisable offline
    OracleGenerator  for synthetic corpora whose texts carry a latent topic
                     token; emits a counterpart with the same topic token
    RemoteGenerator  HTTP client for a generation service
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Protocol

import requests

from .types import AugmentedGroup, QuestionGroup, Text, tokenize, truncate_text

log = logging.getLogger(__name__)

SEPARATOR = "[SEP]"
QUESTION_MAX_TOKENS = 30
ANSWER_MAX_TOKENS = 50

CACHE_HEADER = "%BIGCACHE v1"

# Dropped from stub question output so the template leads with content words.
_STOPWORDS = frozenset(
    """a an the is are was were be been being am do does did has have had
    of in on at to for from by with and or but not no as it its this that
    these those there here i you he she we they what who whom when where
    why how which whose will would can could shall should may might must
    s t""".split()
)


class GenerationError(RuntimeError):
    """Generator could not produce usable output after retries."""


class CacheFormatError(ValueError):
    """Unreadable augmentation cache; carries a line number when known."""


@dataclass(frozen=True)
class GenRequest:
    mode: str  # "question" | "answer"
    source: Text
    max_tokens: int

    def __post_init__(self) -> None:
        if self.mode not in ("question", "answer"):
            raise ValueError(f"unknown generation mode {self.mode!r}")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    @classmethod
    def for_mode(cls, mode: str, source: Text) -> "GenRequest":
        cap = QUESTION_MAX_TOKENS if mode == "question" else ANSWER_MAX_TOKENS
        return cls(mode=mode, source=source, max_tokens=cap)


@dataclass(frozen=True)
class GenCorpusRecord:
    """One fine-tuning example: separator-terminated source, plain target."""

    source: str
    target: str

    def __post_init__(self) -> None:
        if not self.source.endswith(SEPARATOR):
            raise ValueError(f"source must end with {SEPARATOR!r}")


class Generator(Protocol):
    def generate(self, request: GenRequest) -> Text: ...


class StubGenerator:
    """Pure template generator; bit-identical output across runs.

    Question mode: "what about {first 27 source tokens, stopwords dropped}?"
    Answer mode:   "{first 48 source tokens} ."
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def generate(self, request: GenRequest) -> Text:
        if request.mode == "question":
            content = [t for t in request.source.tokens if t not in _STOPWORDS]
            raw = "what about " + " ".join(content[:27]) + "?"
        else:
            raw = " ".join(request.source.tokens[:48]) + " ."
        return truncate_text(tokenize(raw), request.max_tokens)


class OracleGenerator:
    """Topic-consistent generator for synthetic corpora.

    Every synthetic text carries one latent topic token (recognized by
    prefix); the generated counterpart contains the same topic token, so
    synthesized pairs are genuinely more interrelated than random negatives.
    """

    def __init__(self, topic_prefix: str = "topic"):
        self.topic_prefix = topic_prefix

    def _topic_of(self, source: Text) -> str:
        for token in source.tokens:
            if token.startswith(self.topic_prefix):
                return token
        raise GenerationError(
            f"no {self.topic_prefix!r}-prefixed token in {source.raw!r}"
        )

    def generate(self, request: GenRequest) -> Text:
        topic = self._topic_of(request.source)
        if request.mode == "question":
            raw = f"tell me about {topic}"
        else:
            raw = f"{topic} is covered here"
        return truncate_text(tokenize(raw), request.max_tokens)


class RemoteGenerator:
    """Client for the HTTP generation service.

    Sends the bare source text; the service appends the separator before
    encoding. Failed requests are retried; persistent failure raises
    GenerationError for the caller's fallback handling.
    """

    def __init__(
        self,
        base_url: str,
        model_ids: dict[str, str] | None = None,
        retries: int = 3,
        timeout: float = 30.0,
        backoff: float = 0.2,
    ):
        self.base_url = base_url.rstrip("/")
        self.model_ids = model_ids or {"question": "qg-default", "answer": "ag-default"}
        self.retries = retries
        self.timeout = timeout
        self.backoff = backoff
        self._session = requests.Session()

    def generate(self, request: GenRequest) -> Text:
        payload = {
            "mode": request.mode,
            "source": request.source.raw,
            "max_tokens": request.max_tokens,
            "model_id": self.model_ids[request.mode],
        }
        last_error = "no attempts made"
        for attempt in range(1, self.retries + 1):
            try:
                resp = self._session.post(
                    f"{self.base_url}/v1/generate", json=payload, timeout=self.timeout
                )
                if resp.status_code == 200:
                    text = tokenize(resp.json().get("text", ""))
                    if text.is_empty:
                        raise GenerationError("service returned empty text")
                    return truncate_text(text, request.max_tokens)
                last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
            except requests.RequestException as exc:
                last_error = str(exc)
            if attempt < self.retries:
                time.sleep(self.backoff * attempt)
        raise GenerationError(
            f"generation failed after {self.retries} attempts: {last_error}"
        )


def build_qg_corpus(groups: Iterable[QuestionGroup]) -> list[GenCorpusRecord]:
    """Question-generator fine-tuning corpus: one (positive answer -> question)
    record per relevant pair; groups without positives contribute nothing."""
    return [
        GenCorpusRecord(source=f"{pos.raw} {SEPARATOR}", target=group.question.raw)
        for group in groups
        for pos in group.positives
    ]


def build_ag_corpus(groups: Iterable[QuestionGroup]) -> list[GenCorpusRecord]:
    """Answer-generator fine-tuning corpus: one (question -> positive answer)
    record per relevant pair."""
    return [
        GenCorpusRecord(source=f"{group.question.raw} {SEPARATOR}", target=pos.raw)
        for group in groups
        for pos in group.positives
    ]


def write_corpus(records: list[GenCorpusRecord], path: str) -> None:
    """Two-column TAB export consumed by generator fine-tuning."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            if "\t" in rec.source + rec.target or "\n" in rec.source + rec.target:
                raise ValueError(f"corpus text contains delimiter characters: {rec!r}")
            fh.write(f"{rec.source}\t{rec.target}\n")


def synthesize(
    group: QuestionGroup,
    gen: Generator,
    enable_qg: bool = True,
    enable_ag: bool = True,
) -> AugmentedGroup:
    """Generate the pseudo-positive artifacts for one group: an answer for
    the question (answer mode) and a question for each negative answer
    (question mode), truncated to the mode's token cap."""
    if not group.negatives and (enable_qg or enable_ag):
        raise ValueError(
            f"group {group.question_id!r} has no negatives to contrast against"
        )
    synth_answer = None
    if enable_ag:
        synth_answer = _generate_checked(gen, GenRequest.for_mode("answer", group.question))
    synth_questions: list[tuple[int, Text]] = []
    if enable_qg:
        for j, neg in enumerate(group.negatives):
            synth_questions.append(
                (j, _generate_checked(gen, GenRequest.for_mode("question", neg)))
            )
    return AugmentedGroup(
        base=group, synth_answer=synth_answer, synth_questions=tuple(synth_questions)
    )


def _generate_checked(gen: Generator, request: GenRequest) -> Text:
    out = gen.generate(request)
    if out.is_empty:
        raise GenerationError(f"empty output for {request.mode} generation")
    if len(out.tokens) > request.max_tokens:
        out = truncate_text(out, request.max_tokens)
    return out


@dataclass
class AugmentSummary:
    ok: list[str]
    failed: list[str]
    skipped: list[str]  # groups with no negatives: nothing to contrast


def augment_groups(
    groups: list[QuestionGroup],
    gen: Generator,
    enable_qg: bool = True,
    enable_ag: bool = True,
    jobs: int = 1,
) -> tuple[list[AugmentedGroup], AugmentSummary]:
    """Synthesize for every group, falling back to an unaugmented group when
    generation fails (that group then trains pairwise-only). Results are
    joined in group order regardless of worker count."""
    summary = AugmentSummary(ok=[], failed=[], skipped=[])

    def run_one(group: QuestionGroup) -> AugmentedGroup:
        if not group.negatives:
            return AugmentedGroup(base=group)
        try:
            return synthesize(group, gen, enable_qg=enable_qg, enable_ag=enable_ag)
        except GenerationError as exc:
            log.warning("augmentation failed for group %s: %s", group.question_id, exc)
            return AugmentedGroup(base=group)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            augmented = list(pool.map(run_one, groups))
    else:
        augmented = [run_one(g) for g in groups]

    for group, aug in zip(groups, augmented):
        if not group.negatives:
            summary.skipped.append(group.question_id)
        elif aug.has_synthesis or not (enable_qg or enable_ag):
            summary.ok.append(group.question_id)
        else:
            summary.failed.append(group.question_id)
    return augmented, summary


def cache_write(augmented: list[AugmentedGroup], path: str) -> None:
    """Line-oriented cache: a version header, then one JSON record per group
    holding the question id and the synthesized texts."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CACHE_HEADER + "\n")
        for aug in augmented:
            record = {
                "question_id": aug.base.question_id,
                "synth_answer": aug.synth_answer.raw if aug.synth_answer else None,
                "synth_questions": [[j, text.raw] for j, text in aug.synth_questions],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def cache_read(path: str, groups: list[QuestionGroup]) -> list[AugmentedGroup]:
    """Rebuild augmented groups from a cache, attaching each record to its
    base group from ``groups``. Inverse of cache_write for matching data."""
    by_id = {g.question_id: g for g in groups}
    augmented: list[AugmentedGroup] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CACHE_HEADER:
            raise CacheFormatError(
                f"line 1: expected header {CACHE_HEADER!r}, got {header!r}"
            )
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                record = json.loads(line)
                qid = record["question_id"]
                raw_answer = record["synth_answer"]
                raw_questions = record["synth_questions"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CacheFormatError(f"line {line_no}: malformed record: {exc}") from exc
            if qid not in by_id:
                raise CacheFormatError(
                    f"line {line_no}: question_id {qid!r} not present in the dataset"
                )
            base = by_id[qid]
            synth_questions = []
            for item in raw_questions:
                if len(item) != 2 or not isinstance(item[0], int):
                    raise CacheFormatError(f"line {line_no}: malformed synth_questions entry")
                j, raw = item
                if not 0 <= j < len(base.negatives):
                    raise CacheFormatError(
                        f"line {line_no}: negative index {j} out of range for {qid!r}"
                    )
                synth_questions.append((j, tokenize(raw)))
            augmented.append(
                AugmentedGroup(
                    base=base,
                    synth_answer=tokenize(raw_answer) if raw_answer is not None else None,
                    synth_questions=tuple(synth_questions),
                )
            )
    return augmented
