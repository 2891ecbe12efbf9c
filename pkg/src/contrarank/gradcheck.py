"""Finite-difference verification of the analytic gradients.

Checks every partial derivative of the scorer, and of each loss family
composed with the scorer, against central finite differences on randomly
drawn configurations. Configurations sitting too close to a kink of relu,
|u-v|, or an active-hinge boundary are redrawn: the derivative is exact
there under the declared subgradient convention, but a finite difference
straddling the kink measures nothing useful.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import objectives
from .scorer import ModelParams, Vocab, score, score_with_grad
from .types import Text, tokenize

FD_STEP = 1e-5
REL_TOL = 1e-4
ABS_FLOOR = 1e-8
# margin a config must keep from every kink to be FD-checkable
KINK_CLEARANCE = 1e-3

LOSS_FAMILIES = ("pointwise", "hinge", "set_pairwise", "contrastive")

_TOKEN_POOL = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
_OOV_POOL = ["oovword", "another_oov"]


@dataclass
class Violation:
    family: str
    param: str
    index: tuple[int, ...]
    analytic: float
    fd: float

    @property
    def error(self) -> float:
        return abs(self.analytic - self.fd)

    @property
    def rel_error(self) -> float:
        scale = max(abs(self.analytic), abs(self.fd), 1e-12)
        return self.error / scale

    def describe(self) -> str:
        return (
            f"{self.family}: d/d{self.param}{list(self.index)} analytic={self.analytic:.3e} "
            f"fd={self.fd:.3e} rel_err={self.rel_error:.3e}"
        )


@dataclass
class FamilyResult:
    family: str
    n_partials: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class SuiteResult:
    families: dict[str, FamilyResult]
    elapsed_s: float

    @property
    def ok(self) -> bool:
        return all(f.ok for f in self.families.values())

    def worst(self) -> Violation | None:
        all_violations = [v for f in self.families.values() for v in f.violations]
        if not all_violations:
            return None
        return max(all_violations, key=lambda v: v.rel_error)

    def summary_lines(self) -> list[str]:
        lines = []
        for name, fam in self.families.items():
            status = "ok" if fam.ok else f"FAIL ({len(fam.violations)} violations)"
            lines.append(f"{name:<14} {fam.n_partials:>7} partials checked  {status}")
        worst = self.worst()
        if worst is not None:
            lines.append("worst offender: " + worst.describe())
        return lines


def _random_text(rng: np.random.Generator, allow_oov: bool = True) -> Text:
    pool = _TOKEN_POOL + (_OOV_POOL if allow_oov else [])
    n = int(rng.integers(1, 4))
    tokens = [pool[int(i)] for i in rng.integers(0, len(pool), size=n)]
    return tokenize(" ".join(tokens))


def _random_params(rng: np.random.Generator, n_rows: int, d: int = 3, h: int = 4) -> ModelParams:
    return ModelParams(
        E=rng.normal(0.0, 0.7, size=(n_rows, d)),
        W1=rng.normal(0.0, 0.7, size=(h, 4 * d)),
        b1=rng.normal(0.0, 0.5, size=h),
        w2=rng.normal(0.0, 0.7, size=h),
        b2=float(rng.normal(0.0, 0.5)),
    )


def _gradcheck_vocab() -> Vocab:
    return Vocab(index={t: i + 1 for i, t in enumerate(_TOKEN_POOL)})


def _pair_is_clear(q: Text, a: Text, params: ModelParams, vocab: Vocab) -> bool:
    """True when no relu or |u-v| kink sits within finite-difference reach."""
    idx_q = [vocab.lookup(t) for t in q.tokens]
    idx_a = [vocab.lookup(t) for t in a.tokens]
    u = params.E[idx_q].mean(axis=0)
    v = params.E[idx_a].mean(axis=0)
    if np.any(np.abs(u - v) < KINK_CLEARANCE):
        return False
    f = np.concatenate([u, v, u * v, np.abs(u - v)])
    z = params.W1 @ f + params.b1
    return bool(np.all(np.abs(z) > KINK_CLEARANCE))


def _hinges_are_clear(slacks: list[float]) -> bool:
    return all(abs(s) > KINK_CLEARANCE for s in slacks)


@dataclass
class _Config:
    """One checkable drawing: scored pairs by role plus the loss closure."""

    pairs: dict[tuple[str, int], tuple[Text, Text]]
    loss_fn: "callable"
    params: ModelParams


def _total_loss(config: _Config, params: ModelParams, vocab: Vocab) -> float:
    scores = {
        key: score(q, a, params, vocab) for key, (q, a) in config.pairs.items()
    }
    return config.loss_fn(scores)


def _analytic_gradients(config: _Config, params: ModelParams, vocab: Vocab):
    swgs = {
        key: score_with_grad(q, a, params, vocab) for key, (q, a) in config.pairs.items()
    }
    scores = {key: s.score for key, s in swgs.items()}
    loss_value, dscore = config.loss_fn(scores, with_grads=True)
    gE = np.zeros_like(params.E)
    gW1 = np.zeros_like(params.W1)
    gb1 = np.zeros_like(params.b1)
    gw2 = np.zeros_like(params.w2)
    gb2 = 0.0
    for key, weight in dscore.items():
        swg = swgs[key]
        for row, vec in swg.d_embed.items():
            gE[row] += weight * vec
        gW1 += weight * swg.d_w1
        gb1 += weight * swg.d_b1
        gw2 += weight * swg.d_w2
        gb2 += weight * swg.d_b2
    return loss_value, {"E": gE, "W1": gW1, "b1": gb1, "w2": gw2, "b2": gb2}


def _make_loss_closure(family: str, meta: dict):
    """Builds loss_fn(scores, with_grads=False) dispatching through the
    objectives module attributes, so substituted implementations (e.g. in
    mutation tests) are picked up."""

    def loss_fn(scores, with_grads: bool = False):
        if family == "pointwise":
            lv = objectives.pointwise_loss(scores[("pair", 0)], meta["y"])
        elif family == "hinge":
            lv = objectives.hinge(scores[("pos", 0)], scores[("neg", 0)], meta["margin"])
        elif family == "set_pairwise":
            pos = [scores[("pos", i)] for i in range(meta["n_pos"])]
            neg = [scores[("neg", j)] for j in range(meta["n_neg"])]
            lv = objectives.set_pairwise_loss(pos, neg, meta["margin"])
        elif family == "contrastive":
            group = objectives.GroupScores(
                pos_scores=tuple(scores[("pos", i)] for i in range(meta["n_pos"])),
                neg_scores=tuple(scores[("neg", j)] for j in range(meta["n_neg"])),
                synth_answer_score=scores.get(("synth_answer", 0)),
                synth_question_scores=tuple(
                    scores.get(("synth_question", j)) for j in range(meta["n_neg"])
                ),
            )
            lv = objectives.contrastive_loss(group, meta["margin"])
        else:
            raise ValueError(f"unknown family {family!r}")
        if with_grads:
            return lv.value, lv.dscore
        return lv.value

    return loss_fn


def _draw_config(family: str, rng: np.random.Generator, vocab: Vocab) -> _Config:
    """Draw until the configuration is clear of every kink (bounded retries)."""
    n_rows = len(vocab)
    for _ in range(500):
        params = _random_params(rng, n_rows)
        margin = float(rng.uniform(0.2, 1.5))
        pairs: dict[tuple[str, int], tuple[Text, Text]] = {}
        q = _random_text(rng)
        if family == "pointwise":
            pairs[("pair", 0)] = (q, _random_text(rng))
            meta = {"y": int(rng.integers(0, 2))}
        elif family == "hinge":
            pairs[("pos", 0)] = (q, _random_text(rng))
            pairs[("neg", 0)] = (q, _random_text(rng))
            meta = {"margin": margin}
        elif family == "set_pairwise":
            n_pos = int(rng.integers(1, 4))
            n_neg = int(rng.integers(1, 5))
            for i in range(n_pos):
                pairs[("pos", i)] = (q, _random_text(rng))
            for j in range(n_neg):
                pairs[("neg", j)] = (q, _random_text(rng))
            meta = {"margin": margin, "n_pos": n_pos, "n_neg": n_neg}
        else:
            n_pos = int(rng.integers(0, 3))
            n_neg = int(rng.integers(1, 4))
            for i in range(n_pos):
                pairs[("pos", i)] = (q, _random_text(rng))
            for j in range(n_neg):
                pairs[("neg", j)] = (q, _random_text(rng))
            if rng.random() < 0.8:
                pairs[("synth_answer", 0)] = (q, _random_text(rng))
            for j in range(n_neg):
                if rng.random() < 0.8:
                    pairs[("synth_question", j)] = (_random_text(rng), pairs[("neg", j)][1])
            meta = {"margin": margin, "n_pos": n_pos, "n_neg": n_neg}

        if not all(_pair_is_clear(qt, at, params, vocab) for qt, at in pairs.values()):
            continue
        config = _Config(pairs=pairs, loss_fn=_make_loss_closure(family, meta), params=params)
        if family != "pointwise" and not _hinges_are_clear(
            _hinge_slacks(family, meta, config, vocab)
        ):
            continue
        return config
    raise RuntimeError(f"could not draw a kink-free {family} configuration")


def _hinge_slacks(family: str, meta: dict, config: _Config, vocab: Vocab) -> list[float]:
    scores = {
        key: score(q, a, config.params, vocab) for key, (q, a) in config.pairs.items()
    }
    margin = meta["margin"]
    slacks = []
    if family == "hinge":
        slacks.append(margin - scores[("pos", 0)] + scores[("neg", 0)])
    elif family == "set_pairwise":
        for i in range(meta["n_pos"]):
            for j in range(meta["n_neg"]):
                slacks.append(margin - scores[("pos", i)] + scores[("neg", j)])
    else:
        for i in range(meta["n_pos"]):
            for j in range(meta["n_neg"]):
                slacks.append(margin - scores[("pos", i)] + scores[("neg", j)])
        for j in range(meta["n_neg"]):
            if ("synth_answer", 0) in config.pairs:
                slacks.append(margin - scores[("synth_answer", 0)] + scores[("neg", j)])
            if ("synth_question", j) in config.pairs:
                slacks.append(margin - scores[("synth_question", j)] + scores[("neg", j)])
    return slacks


def _check_config(family: str, config: _Config, vocab: Vocab, result: FamilyResult) -> None:
    params = config.params
    _, analytic = _analytic_gradients(config, params, vocab)

    def fd_at(setter, getter) -> float:
        original = getter()
        setter(original + FD_STEP)
        up = _total_loss(config, params, vocab)
        setter(original - FD_STEP)
        down = _total_loss(config, params, vocab)
        setter(original)
        return (up - down) / (2 * FD_STEP)

    for name in ("E", "W1", "b1", "w2"):
        arr = getattr(params, name)
        grad = analytic[name]
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            fd = fd_at(
                lambda v, a=arr, i=idx: a.__setitem__(i, v),
                lambda a=arr, i=idx: float(a[i]),
            )
            _record(result, family, name, idx, float(grad[idx]), fd)
            it.iternext()

    def set_b2(v):
        params.b2 = v

    fd = fd_at(set_b2, lambda: params.b2)
    _record(result, family, "b2", (), analytic["b2"], fd)


def _record(result: FamilyResult, family: str, param: str, idx, analytic: float, fd: float) -> None:
    result.n_partials += 1
    err = abs(analytic - fd)
    if err > max(ABS_FLOOR, REL_TOL * max(abs(analytic), abs(fd))):
        result.violations.append(
            Violation(family=family, param=param, index=tuple(idx), analytic=analytic, fd=fd)
        )


def check_scorer(trials: int, seed: int) -> FamilyResult:
    """FD-check d(score)/d(theta) itself on random (params, q, a) draws."""
    rng = np.random.default_rng(seed)
    vocab = _gradcheck_vocab()
    result = FamilyResult(family="scorer")
    for _ in range(trials):
        config = _draw_config("pointwise", rng, vocab)
        # score only: identity loss over the single pair
        config.loss_fn = lambda scores, with_grads=False: (
            (scores[("pair", 0)], {("pair", 0): 1.0}) if with_grads else scores[("pair", 0)]
        )
        _check_config("scorer", config, vocab, result)
    return result


def check_family(family: str, trials: int, seed: int) -> FamilyResult:
    rng = np.random.default_rng(seed)
    vocab = _gradcheck_vocab()
    result = FamilyResult(family=family)
    for _ in range(trials):
        config = _draw_config(family, rng, vocab)
        _check_config(family, config, vocab, result)
    return result


def run_suite(trials: int = 100, seed: int = 2024, include_scorer: bool = True) -> SuiteResult:
    """The full verification suite used by the CLI and the acceptance tests."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    start = time.perf_counter()
    families: dict[str, FamilyResult] = {}
    if include_scorer:
        families["scorer"] = check_scorer(trials, seed)
    for offset, family in enumerate(LOSS_FAMILIES, start=1):
        families[family] = check_family(family, trials, seed + offset * 1000)
    return SuiteResult(families=families, elapsed_s=time.perf_counter() - start)
