"""Generation backends.

The default backend is a tf-idf nearest-neighbor conditional generator:
fitting indexes the corpus sources, generation returns the target of the
most similar source. It is deterministic (ties resolve to the earliest
corpus record), trains in one pass on CPU, and needs no pretrained
weights, which keeps the service fully offline. Neural encoder-decoder
backends can implement the same two methods and drop in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .corpus import SEPARATOR, SOURCE_SUFFIX, CorpusRecord


def _tokens(text: str, cap: int | None = None) -> list[str]:
    toks = [t for t in text.lower().split() if t != SEPARATOR.lower()]
    return toks if cap is None else toks[:cap]


@dataclass
class TfidfRetrievalBackend:
    """Nearest-neighbor generation over the fine-tuning corpus."""

    max_source_len: int = 128
    max_target_len: int = 50
    epochs: int = 5  # accepted for interface parity; the fit is closed-form
    _idf: dict[str, float] = field(default_factory=dict, repr=False)
    _vectors: list[dict[str, float]] = field(default_factory=list, repr=False)
    _targets: list[str] = field(default_factory=list, repr=False)

    @property
    def fitted(self) -> bool:
        return bool(self._targets)

    def fit(self, records: list[CorpusRecord]) -> None:
        doc_freq: dict[str, int] = {}
        token_lists = []
        for rec in records:
            toks = _tokens(rec.source, self.max_source_len)
            token_lists.append(toks)
            for tok in set(toks):
                doc_freq[tok] = doc_freq.get(tok, 0) + 1
        n_docs = len(records)
        self._idf = {
            tok: math.log((1 + n_docs) / (1 + df)) + 1.0 for tok, df in doc_freq.items()
        }
        self._vectors = [self._vectorize(toks) for toks in token_lists]
        self._targets = [rec.target for rec in records]

    def _vectorize(self, toks: list[str]) -> dict[str, float]:
        counts: dict[str, int] = {}
        for tok in toks:
            counts[tok] = counts.get(tok, 0) + 1
        vec = {
            tok: count * self._idf[tok]
            for tok, count in counts.items()
            if tok in self._idf
        }
        norm = math.sqrt(sum(w * w for w in vec.values()))
        if norm > 0:
            vec = {tok: w / norm for tok, w in vec.items()}
        return vec

    def generate(self, source: str, max_tokens: int | None = None) -> str:
        if not self.fitted:
            raise RuntimeError("backend is not fitted")
        query = self._vectorize(_tokens(source + SOURCE_SUFFIX, self.max_source_len))
        best_idx = 0
        best_sim = -1.0
        for idx, vec in enumerate(self._vectors):
            small, large = (query, vec) if len(query) < len(vec) else (vec, query)
            sim = sum(w * large.get(tok, 0.0) for tok, w in small.items())
            if sim > best_sim:
                best_sim = sim
                best_idx = idx
        cap = max_tokens if max_tokens is not None else self.max_target_len
        words = self._targets[best_idx].split()[:cap]
        return " ".join(words)
