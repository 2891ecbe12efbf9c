"""Synthetic topic-matching benchmark.

Each question and answer carries one latent topic token drawn from a shared
pool; an answer is relevant exactly when its topic matches the question's.
Positives are scarce (12% of candidates, the imbalance of real answer-
selection training sets), and a sizable fraction of questions end up with
no positive at all, which is the case generation-based augmentation is
meant to rescue. The OracleGenerator recognizes the topic tokens, so the
full augmentation mechanism can be exercised end to end at desk scale.
"""

from __future__ import annotations

import numpy as np

from .types import QAPair, QuestionGroup, group_pairs, tokenize, Label


def _make_question(topic: str, noise: list[str]) -> str:
    return f"tell me about {topic} " + " ".join(noise)


def _make_answer(topic: str, noise: list[str]) -> str:
    return f"{topic} is covered here " + " ".join(noise)


def _draw_noise(rng: np.random.Generator, words: list[str], n: int) -> list[str]:
    return [words[i] for i in rng.integers(0, len(words), size=n)]


def make_pairs(
    n_questions: int,
    n_candidates: int = 10,
    p_positive: float = 0.12,
    n_topics: int = 30,
    n_noise_words: int = 50,
    min_positives: int = 0,
    id_prefix: str = "SQ",
    seed: int = 0,
) -> list[QAPair]:
    """Generate labeled QA pairs; with ``min_positives`` > 0 every question
    is guaranteed at least that many relevant candidates."""
    rng = np.random.default_rng(seed)
    topics = [f"topic{i:02d}" for i in range(n_topics)]
    words = [f"word{i:02d}" for i in range(n_noise_words)]
    pairs: list[QAPair] = []
    for qi in range(n_questions):
        qid = f"{id_prefix}{qi:04d}"
        topic = topics[rng.integers(0, n_topics)]
        question = tokenize(_make_question(topic, _draw_noise(rng, words, 2)))
        is_positive = rng.random(n_candidates) < p_positive
        while int(is_positive.sum()) < min_positives:
            is_positive[rng.integers(0, n_candidates)] = True
        for ci in range(n_candidates):
            if is_positive[ci]:
                answer_topic = topic
            else:
                other = rng.integers(0, n_topics - 1)
                answer_topic = topics[other if other < topics.index(topic) else other + 1]
            answer = tokenize(_make_answer(answer_topic, _draw_noise(rng, words, 3)))
            pairs.append(
                QAPair(
                    question_id=qid,
                    question=question,
                    answer=answer,
                    label=Label(binary=1 if is_positive[ci] else 0),
                )
            )
    return pairs


def make_benchmark(
    seed: int = 0,
    n_train: int = 200,
    n_test: int = 50,
    n_candidates: int = 10,
    p_positive: float = 0.12,
) -> tuple[list[QuestionGroup], list[QuestionGroup]]:
    """The shipped 200/50 question benchmark: imbalanced training split,
    held-out test split with at least one relevant answer per question."""
    train_pairs = make_pairs(
        n_train, n_candidates=n_candidates, p_positive=p_positive,
        id_prefix="TR", seed=seed,
    )
    test_pairs = make_pairs(
        n_test, n_candidates=n_candidates, p_positive=p_positive,
        min_positives=1, id_prefix="TE", seed=seed + 10_000,
    )
    return group_pairs(train_pairs), group_pairs(test_pairs)
