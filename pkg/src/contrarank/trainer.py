"""Training loop: per-group SGD over the configured objective.

Groups are visited in seeded shuffled order each epoch; each group's loss
is backpropagated through the scorer's analytic gradients and applied as a
plain gradient-descent update. Everything is deterministic given the seed,
the data, and the config.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import objectives
from .metrics import DEFAULT_KS, MetricReport, evaluate_run
from .objectives import GroupScores, LossConfig, LossValue
from .scorer import ModelParams, ScoreWithGrad, Vocab, init_params, score, score_with_grad
from .types import AugmentedGroup, QuestionGroup, Text

MODES = ("pointwise", "pairwise", "contrastive")


class ConfigurationError(ValueError):
    """Inconsistent training configuration."""


@dataclass(frozen=True)
class AblationFlags:
    disable_qg: bool = False
    disable_ag: bool = False
    treat_synth_as_positive: bool = False


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "pairwise"
    epochs: int = 5
    learning_rate: float = 0.05
    margin: float = 1.0
    seed: int = 17
    embed_dim: int = 32
    hidden_dim: int = 32
    min_freq: int = 1
    ablation: AblationFlags = field(default_factory=AblationFlags)
    eval_ks: tuple[int, ...] = DEFAULT_KS

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        # zero is allowed: a no-op update that still records history
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be non-negative")
        if self.margin < 0:
            raise ConfigurationError("margin must be non-negative")

    def loss_config(self) -> LossConfig:
        return LossConfig(
            mode=self.mode,
            margin=self.margin,
            treat_synth_as_positive=self.ablation.treat_synth_as_positive,
        )


@dataclass
class EpochRecord:
    epoch: int
    mean_train_loss: float
    dev: MetricReport | None = None


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)

    def to_jsonl(self) -> str:
        lines = []
        for rec in self.epochs:
            doc: dict = {"epoch": rec.epoch, "mean_train_loss": rec.mean_train_loss}
            if rec.dev is not None:
                doc["dev"] = json.loads(rec.dev.to_json())
            lines.append(json.dumps(doc, sort_keys=True))
        return "".join(line + "\n" for line in lines)


def _group_texts(groups: list[QuestionGroup]):
    for g in groups:
        yield g.question
        yield from g.positives
        yield from g.negatives


def _apply_update(params: ModelParams, grads: dict, lr: float) -> None:
    for row, vec in grads["embed"].items():
        params.E[row] -= lr * vec
    params.W1 -= lr * grads["w1"]
    params.b1 -= lr * grads["b1"]
    params.w2 -= lr * grads["w2"]
    params.b2 -= lr * grads["b2"]


def _accumulate(grads: dict, swg: ScoreWithGrad, weight: float) -> None:
    if weight == 0.0:
        return
    for row, vec in swg.d_embed.items():
        if row in grads["embed"]:
            grads["embed"][row] = grads["embed"][row] + weight * vec
        else:
            grads["embed"][row] = weight * vec
    grads["w1"] += weight * swg.d_w1
    grads["b1"] += weight * swg.d_b1
    grads["w2"] += weight * swg.d_w2
    grads["b2"] += weight * swg.d_b2


def _empty_grads(params: ModelParams) -> dict:
    return {
        "embed": {},
        "w1": np.zeros_like(params.W1),
        "b1": np.zeros_like(params.b1),
        "w2": np.zeros_like(params.w2),
        "b2": 0.0,
    }


def _synth_for_group(
    aug: AugmentedGroup | None, ablation: AblationFlags
) -> tuple[Text | None, dict[int, Text]]:
    """Synthesized artifacts that survive the ablation flags."""
    if aug is None:
        return None, {}
    synth_answer = None if ablation.disable_ag else aug.synth_answer
    synth_questions = {} if ablation.disable_qg else dict(aug.synth_questions)
    return synth_answer, synth_questions


def group_loss(
    group: QuestionGroup,
    aug: AugmentedGroup | None,
    loss_cfg: LossConfig,
    ablation: AblationFlags,
    params: ModelParams,
    vocab: Vocab,
) -> tuple[float, dict] | None:
    """Loss value and parameter gradients for one group under the configured
    objective; None when the group carries no training signal in this mode."""
    q = group.question

    def swg(question: Text, answer: Text) -> ScoreWithGrad:
        return score_with_grad(question, answer, params, vocab)

    def finish(loss: LossValue, scored: dict) -> tuple[float, dict]:
        acc = _empty_grads(params)
        for key, dls in loss.dscore.items():
            _accumulate(acc, scored[key], dls)
        return loss.value, acc

    if loss_cfg.mode == "pointwise":
        samples = [(answer, 1) for answer in group.positives]
        samples += [(answer, 0) for answer in group.negatives]
        return _pointwise_over(q, samples, params, vocab)

    if loss_cfg.mode == "pairwise":
        if not group.positives or not group.negatives:
            return None
        scored = {}
        for i, pos in enumerate(group.positives):
            scored[("pos", i)] = swg(q, pos)
        for j, neg in enumerate(group.negatives):
            scored[("neg", j)] = swg(q, neg)
        loss = objectives.set_pairwise_loss(
            [scored[("pos", i)].score for i in range(len(group.positives))],
            [scored[("neg", j)].score for j in range(len(group.negatives))],
            loss_cfg.margin,
        )
        return finish(loss, scored)

    # contrastive
    synth_answer, synth_questions = _synth_for_group(aug, ablation)
    if loss_cfg.treat_synth_as_positive:
        samples = [(answer, 1) for answer in group.positives]
        samples += [(answer, 0) for answer in group.negatives]
        extra = []
        if synth_answer is not None:
            extra.append((q, synth_answer, 1))
        for j, synth_q in sorted(synth_questions.items()):
            extra.append((synth_q, group.negatives[j], 1))
        return _pointwise_over(q, samples, params, vocab, extra_pairs=extra)

    if not group.negatives:
        return None
    if not group.positives and synth_answer is None and not synth_questions:
        return None
    scored = {}
    for i, pos in enumerate(group.positives):
        scored[("pos", i)] = swg(q, pos)
    for j, neg in enumerate(group.negatives):
        scored[("neg", j)] = swg(q, neg)
    if synth_answer is not None:
        scored[("synth_answer", 0)] = swg(q, synth_answer)
    synth_q_scores: list[float | None] | None = None
    if synth_questions:
        synth_q_scores = []
        for j in range(len(group.negatives)):
            if j in synth_questions:
                scored[("synth_question", j)] = swg(synth_questions[j], group.negatives[j])
                synth_q_scores.append(scored[("synth_question", j)].score)
            else:
                synth_q_scores.append(None)
    loss = objectives.contrastive_loss(
        GroupScores(
            pos_scores=tuple(scored[("pos", i)].score for i in range(len(group.positives))),
            neg_scores=tuple(scored[("neg", j)].score for j in range(len(group.negatives))),
            synth_answer_score=(
                scored[("synth_answer", 0)].score if synth_answer is not None else None
            ),
            synth_question_scores=tuple(synth_q_scores) if synth_q_scores is not None else None,
        ),
        loss_cfg.margin,
    )
    return finish(loss, scored)


def _pointwise_over(
    q: Text,
    samples: list[tuple[Text, int]],
    params: ModelParams,
    vocab: Vocab,
    extra_pairs: list[tuple[Text, Text, int]] | None = None,
) -> tuple[float, dict] | None:
    """Mean pointwise cross-entropy over (q, answer, label) samples plus any
    explicit (question, answer, label) pairs."""
    all_pairs = [(q, answer, y) for answer, y in samples]
    all_pairs += extra_pairs or []
    if not all_pairs:
        return None
    n = len(all_pairs)
    acc = _empty_grads(params)
    total = 0.0
    for question, answer, y in all_pairs:
        swg = score_with_grad(question, answer, params, vocab)
        loss = objectives.pointwise_loss(swg.score, y)
        total += loss.value
        _accumulate(acc, swg, loss.dscore[("pair", 0)] / n)
    return total / n, acc


def train(
    groups: list[QuestionGroup],
    augmented: list[AugmentedGroup] | None,
    cfg: TrainConfig,
    dev: list[QuestionGroup] | None = None,
) -> tuple[ModelParams, Vocab, TrainHistory]:
    """Fit the scorer on the grouped training data.

    Contrastive mode needs the augmented groups unless both generation
    directions are ablated away, in which case it degenerates to pairwise
    training over the same data.
    """
    if not groups:
        raise ValueError("train requires at least one group")
    needs_aug = cfg.mode == "contrastive" and not (
        cfg.ablation.disable_qg and cfg.ablation.disable_ag
    )
    if needs_aug and augmented is None:
        raise ConfigurationError(
            "contrastive mode requires augmented groups (or both --no-qg and --no-ag)"
        )
    aug_by_id: dict[str, AugmentedGroup] = {
        a.base.question_id: a for a in (augmented or [])
    }
    vocab = Vocab.build(_group_texts(groups), min_freq=cfg.min_freq)
    params = init_params(vocab, d=cfg.embed_dim, h=cfg.hidden_dim, seed=cfg.seed)
    shuffle_rng = np.random.default_rng(cfg.seed)
    loss_cfg = cfg.loss_config()
    history = TrainHistory()
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(groups))
        losses: list[float] = []
        for gi in order:
            group = groups[gi]
            result = group_loss(
                group, aug_by_id.get(group.question_id), loss_cfg, cfg.ablation,
                params, vocab,
            )
            if result is None:
                continue
            value, grads = result
            losses.append(value)
            _apply_update(params, grads, cfg.learning_rate)
        mean_loss = sum(losses) / len(losses) if losses else 0.0
        record = EpochRecord(epoch=epoch, mean_train_loss=mean_loss)
        if dev is not None:
            record.dev = evaluate(params, vocab, dev, ks=cfg.eval_ks)
        history.epochs.append(record)
    return params, vocab, history


def evaluate(
    params: ModelParams,
    vocab: Vocab,
    dataset: list[QuestionGroup],
    ks: tuple[int, ...] = DEFAULT_KS,
    include_empty: bool = False,
) -> MetricReport:
    """Score every candidate of every group and compute the full report."""
    scores: dict[tuple[str, int], float] = {}
    for group in dataset:
        for idx, answer in enumerate(group.candidates()):
            scores[(group.question_id, idx)] = score(group.question, answer, params, vocab)
    return evaluate_run(dataset, scores, ks=ks, include_empty=include_empty)
