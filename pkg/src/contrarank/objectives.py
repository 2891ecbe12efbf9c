"""Loss functions over scorer outputs: pointwise, pairwise hinge, set
pairwise, and the contrastive objective over synthesized pseudo-positives.

Every loss returns its value together with d(loss)/d(score) for each
contributing pair, keyed by role so a training loop can route gradients
back through the scorer. Role keys:

    ("pair", 0)            pointwise sample
    ("pos", i)             i-th relevant answer scored against the question
    ("neg", j)             j-th irrelevant answer scored against the question
    ("synth_answer", 0)    synthesized answer scored against the question
    ("synth_question", j)  synthesized question scored against the j-th negative
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

RoleKey = tuple[str, int]


@dataclass(frozen=True)
class LossConfig:
    """Objective selection and knobs shared across the trainer and CLI."""

    mode: str = "pairwise"  # "pointwise" | "pairwise" | "contrastive"
    margin: float = 1.0
    treat_synth_as_positive: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("pointwise", "pairwise", "contrastive"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")


@dataclass
class LossValue:
    value: float
    dscore: dict[RoleKey, float] = field(default_factory=dict)


@dataclass(frozen=True)
class GroupScores:
    """Scorer outputs for one question group, in the roles the contrastive
    objective consumes. ``synth_question_scores`` aligns one-to-one with
    ``neg_scores``; individual entries may be None when generation was
    disabled or failed for that negative."""

    pos_scores: tuple[float, ...]
    neg_scores: tuple[float, ...]
    synth_answer_score: float | None = None
    synth_question_scores: tuple[float | None, ...] | None = None


def _softplus(x: float) -> float:
    # log(1 + e^x) without overflow for large |x|
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def pointwise_loss(score: float, y: int) -> LossValue:
    """Cross-entropy of the sigmoid-squashed score against a 0/1 label.

    value = -[y log p + (1-y) log(1-p)] with p = sigmoid(score), computed
    in log-sum-exp form so saturated scores cannot overflow.
    """
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y}")
    value = _softplus(-score) + (1 - y) * score
    grad = _sigmoid(score) - y
    return LossValue(value=value, dscore={("pair", 0): grad})


def hinge(score_pos: float, score_neg: float, margin: float) -> LossValue:
    """max(0, margin - score_pos + score_neg); subgradient 0 at the kink."""
    value = margin - score_pos + score_neg
    if value > 0.0:
        return LossValue(value=value, dscore={("pos", 0): -1.0, ("neg", 0): 1.0})
    return LossValue(value=0.0, dscore={("pos", 0): 0.0, ("neg", 0): 0.0})


def set_pairwise_loss(
    scores_pos: list[float] | tuple[float, ...],
    scores_neg: list[float] | tuple[float, ...],
    margin: float,
) -> LossValue:
    """Mean hinge over the positive x negative cross product.

    Empty positives contribute zero loss rather than an error: such groups
    carry no conventional pairwise signal but still appear inside the
    contrastive objective, where synthesized positives supply the signal.
    """
    if not scores_neg:
        raise ValueError("set_pairwise_loss requires at least one negative score")
    dscore: dict[RoleKey, float] = {}
    for i in range(len(scores_pos)):
        dscore[("pos", i)] = 0.0
    for j in range(len(scores_neg)):
        dscore[("neg", j)] = 0.0
    if not scores_pos:
        return LossValue(value=0.0, dscore=dscore)
    n_cross = len(scores_pos) * len(scores_neg)
    weight = 1.0 / n_cross
    total = 0.0
    for i, sp in enumerate(scores_pos):
        for j, sn in enumerate(scores_neg):
            slack = margin - sp + sn
            if slack > 0.0:
                total += slack
                dscore[("pos", i)] -= weight
                dscore[("neg", j)] += weight
    return LossValue(value=total / n_cross, dscore=dscore)


def contrastive_loss(group: GroupScores, margin: float) -> LossValue:
    """Set-pairwise loss plus hinge terms pitting synthesized pseudo-positive
    pairs against the original negative pairs.

    For each negative j the synthesized answer (scored against the original
    question) and the synthesized question (scored against that negative)
    must each outscore the original negative pair by the margin; those
    hinges are averaged over the negatives and added to the base loss.
    """
    if not group.neg_scores:
        raise ValueError("contrastive_loss requires at least one negative score")
    sq = group.synth_question_scores
    if sq is not None and len(sq) != len(group.neg_scores):
        raise ValueError(
            f"synthesized-question scores misaligned: {len(sq)} for "
            f"{len(group.neg_scores)} negatives"
        )
    base = set_pairwise_loss(group.pos_scores, group.neg_scores, margin)
    dscore = dict(base.dscore)
    n_neg = len(group.neg_scores)
    sa = group.synth_answer_score
    if sa is not None:
        dscore.setdefault(("synth_answer", 0), 0.0)
    extra = 0.0
    for j, sn in enumerate(group.neg_scores):
        if sa is not None:
            part = hinge(sa, sn, margin)
            extra += part.value
            dscore[("synth_answer", 0)] += part.dscore[("pos", 0)] / n_neg
            dscore[("neg", j)] += part.dscore[("neg", 0)] / n_neg
        if sq is not None and sq[j] is not None:
            part = hinge(sq[j], sn, margin)
            extra += part.value
            dscore[("synth_question", j)] = part.dscore[("pos", 0)] / n_neg
            dscore[("neg", j)] += part.dscore[("neg", 0)] / n_neg
    return LossValue(value=base.value + extra / n_neg, dscore=dscore)
