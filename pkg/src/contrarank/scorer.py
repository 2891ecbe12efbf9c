"""Differentiable relevance scorer: forward pass and exact analytic gradients.

Architecture: mean-pooled token embeddings for question and answer, a 4-way
feature fusion [u; v; u*v; |u-v|], and a one-hidden-layer relu MLP head.
Small enough to train on a CPU in seconds, rich enough that every objective
has nontrivial gradients. Richer models can replace it by implementing the
same score / score_with_grad contract.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .types import Text

UNK_INDEX = 0

CHECKPOINT_MAGIC = b"CRNK1"


class CheckpointFormatError(ValueError):
    """Unreadable or wrong-version model checkpoint."""


@dataclass(frozen=True)
class Vocab:
    """Dense token -> index map; index 0 is the shared UNK row.

    Deterministic given corpus order and the minimum-frequency cutoff:
    kept tokens are indexed in first-occurrence order starting at 1.
    """

    index: dict[str, int]

    def __len__(self) -> int:
        return len(self.index) + 1  # UNK row

    def lookup(self, token: str) -> int:
        return self.index.get(token, UNK_INDEX)

    def tokens_in_index_order(self) -> list[str]:
        return sorted(self.index, key=self.index.__getitem__)

    @classmethod
    def build(cls, texts: Iterable[Text], min_freq: int = 1) -> "Vocab":
        counts: dict[str, int] = {}
        first_seen: list[str] = []
        for text in texts:
            for token in text.tokens:
                if token not in counts:
                    first_seen.append(token)
                    counts[token] = 0
                counts[token] += 1
        index = {}
        next_id = 1
        for token in first_seen:
            if counts[token] >= min_freq:
                index[token] = next_id
                next_id += 1
        return cls(index=index)


@dataclass
class ModelParams:
    """All trainable parameters of the scorer."""

    E: np.ndarray   # (|V|, d) token embeddings, row 0 = UNK
    W1: np.ndarray  # (h, 4d)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h,)
    b2: float

    @property
    def d(self) -> int:
        return self.E.shape[1]

    @property
    def h(self) -> int:
        return self.W1.shape[0]

    def validate(self) -> None:
        v, d = self.E.shape
        h, four_d = self.W1.shape
        if four_d != 4 * d:
            raise ValueError(f"W1 second dim {four_d} != 4*d = {4 * d}")
        if self.b1.shape != (h,) or self.w2.shape != (h,):
            raise ValueError("b1/w2 shape inconsistent with W1")
        for name, arr in (("E", self.E), ("W1", self.W1), ("b1", self.b1), ("w2", self.w2)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if not np.isfinite(self.b2):
            raise ValueError("b2 is non-finite")

    def copy(self) -> "ModelParams":
        return ModelParams(
            E=self.E.copy(), W1=self.W1.copy(), b1=self.b1.copy(),
            w2=self.w2.copy(), b2=self.b2,
        )


@dataclass
class ScoreWithGrad:
    """A score plus d(score)/d(theta); embedding grads only for touched rows."""

    score: float
    d_embed: dict[int, np.ndarray]  # row index -> (d,) gradient
    d_w1: np.ndarray
    d_b1: np.ndarray
    d_w2: np.ndarray
    d_b2: float


def init_params(vocab: Vocab, d: int = 32, h: int = 32, seed: int = 17) -> ModelParams:
    """Seeded initialization: E uniform in [-0.1, 0.1]; W1 and w2 uniform
    scaled by the inverse square root of their fan-in; biases zero."""
    rng = np.random.default_rng(seed)
    n_rows = len(vocab)
    E = rng.uniform(-0.1, 0.1, size=(n_rows, d))
    w1_scale = 1.0 / np.sqrt(4 * d)
    W1 = rng.uniform(-w1_scale, w1_scale, size=(h, 4 * d))
    w2_scale = 1.0 / np.sqrt(h)
    w2 = rng.uniform(-w2_scale, w2_scale, size=h)
    return ModelParams(E=E, W1=W1, b1=np.zeros(h), w2=w2, b2=0.0)


def _token_indices(text: Text, vocab: Vocab) -> list[int]:
    if text.is_empty:
        raise ValueError(f"cannot score empty text {text.raw!r}")
    return [vocab.lookup(t) for t in text.tokens]


def embed_mean(text: Text, params: ModelParams, vocab: Vocab) -> np.ndarray:
    """Mean of the embedding rows of the text's tokens (UNK row for OOV)."""
    idx = _token_indices(text, vocab)
    return params.E[idx].mean(axis=0)


def _forward(q: Text, a: Text, params: ModelParams, vocab: Vocab):
    u = embed_mean(q, params, vocab)
    v = embed_mean(a, params, vocab)
    f = np.concatenate([u, v, u * v, np.abs(u - v)])
    z = params.W1 @ f + params.b1
    r = np.maximum(z, 0.0)
    s = float(params.w2 @ r + params.b2)
    return u, v, f, z, r, s


def score(q: Text, a: Text, params: ModelParams, vocab: Vocab) -> float:
    """Relevance score of (q, a) under the current parameters."""
    return _forward(q, a, params, vocab)[-1]


def score_with_grad(q: Text, a: Text, params: ModelParams, vocab: Vocab) -> ScoreWithGrad:
    """Score plus exact partial derivatives with respect to every parameter.

    Subgradient conventions: relu'(0) = 0 and d|x|/dx = 0 at x = 0.
    """
    u, v, f, z, r, s = _forward(q, a, params, vocab)
    d = params.d
    g = params.w2 * (z > 0.0)           # d(score)/dz
    d_b1 = g
    d_w1 = np.outer(g, f)
    d_w2 = r
    df = params.W1.T @ g                # d(score)/df
    sgn = np.sign(u - v)
    du = df[:d] + df[2 * d:3 * d] * v + df[3 * d:] * sgn
    dv = df[d:2 * d] + df[2 * d:3 * d] * u - df[3 * d:] * sgn

    d_embed: dict[int, np.ndarray] = {}
    q_idx = _token_indices(q, vocab)
    a_idx = _token_indices(a, vocab)
    for idx, dvec, n in ((q_idx, du, len(q_idx)), (a_idx, dv, len(a_idx))):
        contribution = dvec / n
        for row in idx:
            if row in d_embed:
                d_embed[row] = d_embed[row] + contribution
            else:
                d_embed[row] = contribution.copy()

    return ScoreWithGrad(score=s, d_embed=d_embed, d_w1=d_w1, d_b1=d_b1, d_w2=d_w2, d_b2=1.0)


def save_params(params: ModelParams, vocab: Vocab, path: str) -> None:
    """Versioned binary checkpoint: magic, dims, float64 LE arrays, vocab."""
    params.validate()
    tokens = vocab.tokens_in_index_order()
    if len(tokens) + 1 != params.E.shape[0]:
        raise ValueError("vocabulary size inconsistent with embedding rows")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<III", params.d, params.h, params.E.shape[0]))
        for arr in (params.E, params.W1, params.b1, params.w2):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        fh.write(struct.pack("<d", params.b2))
        for token in tokens:
            raw = token.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def load_params(path: str) -> tuple[ModelParams, Vocab]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(
            f"{path}: bad magic {blob[:len(CHECKPOINT_MAGIC)]!r}, expected {CHECKPOINT_MAGIC!r}"
        )
    offset = len(CHECKPOINT_MAGIC)
    try:
        d, h, n_rows = struct.unpack_from("<III", blob, offset)
        offset += 12

        def take(count: int) -> np.ndarray:
            nonlocal offset
            nbytes = count * 8
            arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).copy()
            offset += nbytes
            return arr

        E = take(n_rows * d).reshape(n_rows, d)
        W1 = take(h * 4 * d).reshape(h, 4 * d)
        b1 = take(h)
        w2 = take(h)
        (b2,) = struct.unpack_from("<d", blob, offset)
        offset += 8
        index: dict[str, int] = {}
        for i in range(1, n_rows):
            (length,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            token = blob[offset:offset + length].decode("utf-8")
            offset += length
            index[token] = i
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise CheckpointFormatError(f"{path}: truncated or corrupt checkpoint: {exc}") from exc
    if offset != len(blob):
        raise CheckpointFormatError(f"{path}: {len(blob) - offset} trailing bytes")
    params = ModelParams(E=E, W1=W1, b1=b1, w2=w2, b2=float(b2))
    params.validate()
    return params, Vocab(index=index)
