"""Independent naive reference implementations used as test oracles.

Everything here is written straight from the metric/loss definitions with
plain Python loops, deliberately not sharing code with the package.
"""

from __future__ import annotations

import math


def naive_reciprocal_rank(binary_labels: list[int]) -> float | None:
    rank = 1
    for y in binary_labels:
        if y == 1:
            return 1.0 / rank
        rank += 1
    return None


def naive_average_precision(binary_labels: list[int]) -> float | None:
    total = 0.0
    n_rel_seen = 0
    for pos in range(len(binary_labels)):
        if binary_labels[pos] == 1:
            n_rel_seen += 1
            n_rel_in_prefix = 0
            for p in range(pos + 1):
                if binary_labels[p] == 1:
                    n_rel_in_prefix += 1
            total += n_rel_in_prefix / (pos + 1)
    if n_rel_seen == 0:
        return None
    return total / n_rel_seen


def naive_precision_at_k(binary_labels: list[int], k: int) -> float:
    count = 0
    for pos in range(min(k, len(binary_labels))):
        if binary_labels[pos] == 1:
            count += 1
    return count / k


def naive_ndcg_at_k(grades: list[int], k: int) -> float | None:
    def dcg(ordered: list[int]) -> float:
        total = 0.0
        for pos in range(min(k, len(ordered))):
            gain = 2.0 ** ordered[pos] - 1.0
            total += gain / (math.log(pos + 2) / math.log(2))
        return total

    ideal = dcg(sorted(grades, reverse=True))
    if ideal == 0.0:
        return None
    return dcg(grades) / ideal


def naive_set_pairwise(
    scores_pos: list[float], scores_neg: list[float], margin: float
) -> float:
    if not scores_pos:
        return 0.0
    total = 0.0
    for sp in scores_pos:
        for sn in scores_neg:
            h = margin - sp + sn
            if h > 0.0:
                total += h
    return total / (len(scores_pos) * len(scores_neg))


def rank_by_score(items: list[tuple[float, object]]) -> list[object]:
    """Stable descending sort by score, ties kept in input order; returns
    the payloads in rank order."""
    decorated = [(score, idx, payload) for idx, (score, payload) in enumerate(items)]
    decorated.sort(key=lambda t: (-t[0], t[1]))
    return [payload for _, _, payload in decorated]
