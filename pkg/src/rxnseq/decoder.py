"""Grammar-constrained greedy decoding over a pluggable logit source."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple, Protocol, Sequence

import numpy as np

from .codec import ParseStatus, TokenSequence, decode_tokens
from .fsm import DecodeState, accepts, allowed_tokens, run, step
from .schema import ReactionStructure, ResolvedReaction
from .vocab import Vocabulary

__all__ = [
    "DecodeConfig",
    "DecodeResult",
    "DecodeState",
    "LogitSource",
    "LogitSourceError",
    "accepts",
    "allowed_tokens",
    "bigram_source",
    "greedy_decode",
    "postprocess",
    "replay_oracle",
    "step",
]


class LogitSource(Protocol):
    """Maps a token prefix to one raw score per vocabulary id."""

    def __call__(self, prefix: Sequence[int]) -> np.ndarray: ...


class LogitSourceError(RuntimeError):
    pass


@dataclass(frozen=True)
class DecodeConfig:
    vocab: Vocabulary = field(default_factory=Vocabulary)
    max_length: int = 500
    allow_empty_output: bool = True

    def __post_init__(self) -> None:
        if self.max_length < 1:
            raise ValueError(f"max_length must be >= 1, got {self.max_length}")


class DecodeResult(NamedTuple):
    sequence: TokenSequence
    structure: ReactionStructure
    truncated: bool


def greedy_decode(
    source: LogitSource,
    config: DecodeConfig | None = None,
    width: float = 1.0,
    height: float = 1.0,
    post: bool = True,
) -> DecodeResult:
    """Pick the best legal token at each step until [EOS] or ``max_length``.

    Ties go to the lowest token id. ``width``/``height`` are the source image
    size, used to turn bins back into pixels.
    """
    config = config or DecodeConfig()
    vocab = config.vocab
    state = DecodeState.START
    prefix: list[int] = []
    while len(prefix) < config.max_length:
        scores = np.asarray(source(tuple(prefix)), dtype=np.float64)
        if scores.shape != (vocab.size,):
            raise LogitSourceError(
                f"logit source returned shape {scores.shape}, expected ({vocab.size},)"
            )
        mask = allowed_tokens(state, vocab)
        if state is DecodeState.START and not config.allow_empty_output:
            mask = mask.copy()
            mask[vocab.eos] = False
        # nan scores never win
        masked = np.where(mask & ~np.isnan(scores), scores, -np.inf)
        token = int(np.argmax(masked))
        if not mask[token]:
            # every legal score was nan or -inf; fall back to the lowest legal id
            token = int(np.flatnonzero(mask)[0])
        prefix.append(token)
        state = step(state, token, vocab)
        if state is DecodeState.EOS:
            break
    seq = TokenSequence(tuple(prefix), width, height)
    parsed = decode_tokens(seq, vocab)
    structure = postprocess(parsed.structure) if post else parsed.structure
    return DecodeResult(seq, structure, parsed.status is ParseStatus.TRUNCATED)


def postprocess(structure: ReactionStructure) -> ReactionStructure:
    """Drop empty entities, the reactions they invalidate, and exact duplicates."""
    kept: list[ResolvedReaction] = []
    seen: set = set()
    for rxn in structure:
        pruned = ResolvedReaction(
            *(tuple(e for e in role if not e.bbox.is_degenerate()) for role in rxn.roles())
        )
        if not pruned.reactants or not pruned.products:
            continue
        sig = pruned.signature()
        if sig in seen:
            continue
        seen.add(sig)
        kept.append(pruned)
    return ReactionStructure(tuple(kept))


class ReplayOracle:
    """Scores 1 for the target's next token and 0 elsewhere, plus optional bounded noise.

    Noise is uniform in ``[-noise, noise]`` and seeded by ``(seed, len(prefix))``,
    so a given prefix always sees the same scores.
    """

    def __init__(self, target: Sequence[int], vocab: Vocabulary, noise: float = 0.0, seed: int = 0):
        target = tuple(getattr(target, "tokens", target))
        if not accepts(target, vocab):
            state, bad = run(target, vocab)
            where = f"position {bad}" if bad is not None else f"end (state {state.value})"
            raise ValueError(f"replay target is not a complete grammatical sequence: fails at {where}")
        self.target = target
        self.vocab = vocab
        self.noise = float(noise)
        self.seed = seed

    def __call__(self, prefix: Sequence[int]) -> np.ndarray:
        scores = np.zeros(self.vocab.size)
        if self.noise > 0:
            rng = np.random.default_rng([self.seed, len(prefix)])
            scores += rng.uniform(-self.noise, self.noise, self.vocab.size)
        if len(prefix) < len(self.target):
            scores[self.target[len(prefix)]] += 1.0
        return scores


def replay_oracle(target, vocab: Vocabulary | None = None, noise: float = 0.0, seed: int = 0) -> ReplayOracle:
    return ReplayOracle(target, vocab or Vocabulary(), noise, seed)


class BigramSource:
    """Add-k smoothed bigram model; the empty prefix conditions on [BOS]."""

    def __init__(self, train: Sequence, vocab: Vocabulary, smoothing: float = 1.0):
        if not train:
            raise ValueError("bigram corpus is empty")
        if smoothing <= 0:
            raise ValueError(f"smoothing must be positive, got {smoothing}")
        self.vocab = vocab
        self.smoothing = float(smoothing)
        self.counts: dict[int, Counter] = defaultdict(Counter)
        for seq in train:
            toks = [vocab.bos, *getattr(seq, "tokens", seq)]
            for a, b in zip(toks, toks[1:]):
                self.counts[a][b] += 1

    def __call__(self, prefix: Sequence[int]) -> np.ndarray:
        last = prefix[-1] if prefix else self.vocab.bos
        row = self.counts.get(last, {})
        scores = np.full(self.vocab.size, self.smoothing)
        for tok, n in row.items():
            scores[tok] += n
        return scores / (sum(row.values()) + self.smoothing * self.vocab.size)


def bigram_source(train: Sequence, vocab: Vocabulary | None = None, smoothing: float = 1.0) -> BigramSource:
    return BigramSource(train, vocab or Vocabulary(), smoothing)

