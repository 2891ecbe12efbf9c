"""IR evaluation over ranked lists: MRR, MAP, P@k, nDCG@k.

Queries with no relevant answer are skipped for rank-based metrics by
default (they cannot be ranked well or badly); P@k always counts them.
Pass ``include_empty=True`` to score skipped queries as 0 instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .types import Label, QAPair, QuestionGroup, RankedList

DEFAULT_KS = (1, 3, 10)


@dataclass(frozen=True)
class QueryMetrics:
    rr: float | None
    ap: float | None
    p_at_k: dict[int, float]
    ndcg_at_k: dict[int, float | None]


@dataclass(frozen=True)
class MetricReport:
    per_query: dict[str, QueryMetrics]
    aggregate: dict[str, float]
    n_queries_scored: int
    n_queries_skipped: int

    def to_json(self) -> str:
        doc = dict(self.aggregate)
        doc["n_queries_scored"] = self.n_queries_scored
        doc["n_queries_skipped"] = self.n_queries_skipped
        return json.dumps(doc, sort_keys=True)

    def to_table(self) -> str:
        names = list(self.aggregate)
        width = max(len(n) for n in names)
        lines = [f"{n:<{width}}  {self.aggregate[n]:.4f}" for n in names]
        lines.append(
            f"queries: {self.n_queries_scored} scored, {self.n_queries_skipped} skipped"
        )
        return "\n".join(lines)


def _gains(rl: RankedList) -> list[int]:
    return [e[1].graded if e[1].graded is not None else e[1].binary for e in rl.entries]


def reciprocal_rank(rl: RankedList) -> float | None:
    """1/rank of the first relevant entry; None when nothing is relevant."""
    for pos, (_, label) in enumerate(rl.entries, start=1):
        if label.binary == 1:
            return 1.0 / pos
    return None


def average_precision(rl: RankedList) -> float | None:
    """Mean of precision@i over the relevant positions i; None if no relevant."""
    precisions = []
    n_rel = 0
    for pos, (_, label) in enumerate(rl.entries, start=1):
        if label.binary == 1:
            n_rel += 1
            precisions.append(n_rel / pos)
    if not precisions:
        return None
    return sum(precisions) / len(precisions)


def precision_at_k(rl: RankedList, k: int) -> float:
    """Relevant count in the top min(k, len) positions, divided by k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n_rel = sum(1 for _, label in rl.entries[:k] if label.binary == 1)
    return n_rel / k


def _dcg(gains: list[int], k: int) -> float:
    return sum(
        (2 ** g - 1) / math.log2(i + 1)
        for i, g in enumerate(gains[:k], start=1)
    )


def ndcg_at_k(rl: RankedList, k: int) -> float | None:
    """DCG@k over the score ranking divided by DCG@k of the ideal ranking,
    with gain 2^rel - 1 and discount log2(rank + 1). None when the ideal
    DCG is zero (all gains zero)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    gains = _gains(rl)
    idcg = _dcg(sorted(gains, reverse=True), k)
    if idcg == 0.0:
        return None
    return _dcg(gains, k) / idcg


def evaluate_ranked_lists(
    ranked: list[RankedList],
    ks: tuple[int, ...] = DEFAULT_KS,
    include_empty: bool = False,
) -> MetricReport:
    """Apply all metrics per query and aggregate as unweighted means.

    Each metric averages over the queries where it is defined; with
    ``include_empty`` skipped queries contribute 0 everywhere instead.
    """
    per_query: dict[str, QueryMetrics] = {}
    rrs: list[float] = []
    aps: list[float] = []
    ps: dict[int, list[float]] = {k: [] for k in ks}
    ndcgs: dict[int, list[float]] = {k: [] for k in ks}
    n_scored = 0
    n_skipped = 0
    for rl in ranked:
        rr = reciprocal_rank(rl)
        ap = average_precision(rl)
        p_at = {k: precision_at_k(rl, k) for k in ks}
        ndcg_at = {k: ndcg_at_k(rl, k) for k in ks}
        per_query[rl.query_id] = QueryMetrics(rr=rr, ap=ap, p_at_k=p_at, ndcg_at_k=ndcg_at)
        if rr is None:
            n_skipped += 1
        else:
            n_scored += 1
        if rr is not None:
            rrs.append(rr)
        elif include_empty:
            rrs.append(0.0)
        if ap is not None:
            aps.append(ap)
        elif include_empty:
            aps.append(0.0)
        for k in ks:
            ps[k].append(p_at[k])
            if ndcg_at[k] is not None:
                ndcgs[k].append(ndcg_at[k])
            elif include_empty:
                ndcgs[k].append(0.0)

    def mean(values: list[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    aggregate: dict[str, float] = {"map": mean(aps), "mrr": mean(rrs)}
    for k in ks:
        aggregate[f"p@{k}"] = mean(ps[k])
    for k in ks:
        aggregate[f"ndcg@{k}"] = mean(ndcgs[k])
    if include_empty:
        n_scored += n_skipped
        n_skipped = 0
    return MetricReport(
        per_query=per_query,
        aggregate=aggregate,
        n_queries_scored=n_scored,
        n_queries_skipped=n_skipped,
    )


def ranked_list_for_group(
    group: QuestionGroup, scores: dict[tuple[str, int], float]
) -> RankedList:
    """Rank a group's candidates (positives first, then negatives) by the
    provided scores; missing scores are an error naming the pair."""
    scored: list[tuple[float, Label]] = []
    for idx, _ in enumerate(group.candidates()):
        key = (group.question_id, idx)
        if key not in scores:
            raise KeyError(f"missing score for question {group.question_id!r} answer {idx}")
        label = Label(binary=1 if idx < len(group.positives) else 0)
        scored.append((scores[key], label))
    return RankedList.from_scores(group.question_id, scored)


def evaluate_run(
    groups: list[QuestionGroup],
    scores: dict[tuple[str, int], float],
    ks: tuple[int, ...] = DEFAULT_KS,
    include_empty: bool = False,
) -> MetricReport:
    """Score-rank every group's candidates and aggregate all metrics."""
    ranked = [ranked_list_for_group(g, scores) for g in groups]
    return evaluate_ranked_lists(ranked, ks=ks, include_empty=include_empty)


def ranked_lists_from_pairs(
    pairs: list[QAPair], scores: dict[tuple[str, int], float]
) -> list[RankedList]:
    """Build per-question ranked lists straight from labeled pairs, keeping
    graded labels and the file order of candidates for tie-breaking. The
    answer index keys count per question, in file order."""
    order: list[str] = []
    scored: dict[str, list[tuple[float, Label]]] = {}
    for pair in pairs:
        qid = pair.question_id
        if qid not in scored:
            order.append(qid)
            scored[qid] = []
        idx = len(scored[qid])
        key = (qid, idx)
        if key not in scores:
            raise KeyError(f"missing score for question {qid!r} answer {idx}")
        scored[qid].append((scores[key], pair.label))
    return [RankedList.from_scores(qid, scored[qid]) for qid in order]
