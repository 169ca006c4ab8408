"""Serialize reaction structures to token sequences and parse them back."""

from __future__ import annotations

import enum
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .fsm import DecodeState, IllegalTokenError, role_of, step
from .schema import (
    BBox,
    DiagramRecord,
    Entity,
    Reaction,
    ReactionStructure,
    ResolvedReaction,
    require_valid,
)
from .vocab import Vocabulary, dequantize, quantize


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[int, ...]
    width: float
    height: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[int]:
        return iter(self.tokens)


@dataclass(frozen=True)
class OrderingPolicy:
    """How reactions are ordered in the target sequence.

    ``annotated`` keeps dataset order, ``reading`` sorts top-to-bottom then
    left-to-right by reactant boxes, ``random`` shuffles with ``seed``.
    """

    kind: str = "annotated"
    seed: int | None = None

    KINDS = ("annotated", "reading", "random")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown ordering {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "random" and self.seed is None:
            raise ValueError("random ordering needs an explicit seed")

    @classmethod
    def annotated(cls) -> OrderingPolicy:
        return cls("annotated")

    @classmethod
    def reading(cls) -> OrderingPolicy:
        return cls("reading")

    @classmethod
    def random(cls, seed: int) -> OrderingPolicy:
        return cls("random", seed)


def order_reactions(record: DiagramRecord, order: OrderingPolicy) -> list[Reaction]:
    reactions = list(record.reactions)
    if order.kind == "annotated":
        return reactions
    if order.kind == "reading":
        boxes = record.entity_map()

        def key(r: Reaction) -> tuple[float, float]:
            return (min(boxes[i].bbox.y1 for i in r.reactants), min(boxes[i].bbox.x1 for i in r.reactants))

        return sorted(reactions, key=key)
    perm = np.random.default_rng(order.seed).permutation(len(reactions))
    return [reactions[i] for i in perm]


def _entity_tokens(e: Entity, width: float, height: float, vocab: Vocabulary) -> list[int]:
    n = vocab.n_bins
    b = e.bbox
    return [
        quantize(b.x1, width, n),
        quantize(b.y1, height, n),
        quantize(b.x2, width, n),
        quantize(b.y2, height, n),
        vocab.type_token(e.etype),
    ]


def encode(
    record: DiagramRecord,
    vocab: Vocabulary | None = None,
    order: OrderingPolicy | None = None,
) -> TokenSequence:
    """Token sequence of ``record``. Shared entities are re-emitted in every reaction."""
    vocab = vocab or Vocabulary()
    order = order or OrderingPolicy.annotated()
    require_valid(record)
    w, h = record.width, record.height
    role_end = (vocab.rct, vocab.cnd, vocab.prd)
    tokens: list[int] = []
    for rxn in record.resolve(order_reactions(record, order)):
        for role, end in zip(rxn.roles(), role_end):
            for e in role:
                tokens.extend(_entity_tokens(e, w, h, vocab))
            tokens.append(end)
        tokens.append(vocab.rxn)
    tokens.append(vocab.eos)
    return TokenSequence(tuple(tokens), w, h)


class ParseStatus(enum.Enum):
    CLEAN = "clean"
    TRUNCATED = "truncated"
    INVALID = "invalid"


@dataclass(frozen=True)
class ParseResult:
    structure: ReactionStructure
    status: ParseStatus
    error_position: int | None = None

    @property
    def clean(self) -> bool:
        return self.status is ParseStatus.CLEAN


def decode_tokens(seq: TokenSequence, vocab: Vocabulary | None = None) -> ParseResult:
    """Parse a token list into reactions with pixel boxes.

    Parsing stops at the first token the grammar forbids; reactions completed
    before that point are kept and the partial one is dropped. Entity ids are
    assigned in order of appearance.
    """
    vocab = vocab or Vocabulary()
    n = vocab.n_bins
    state = DecodeState.START
    reactions: list[ResolvedReaction] = []
    roles: dict = {}
    coords: list[int] = []
    next_id = 0
    for pos, token in enumerate(seq.tokens):
        try:
            new = step(state, token, vocab)
        except IllegalTokenError:
            return ParseResult(ReactionStructure(reactions), ParseStatus.INVALID, pos)
        if state in (DecodeState.START, DecodeState.RXN_END) and new is not DecodeState.EOS:
            roles = {"Rct": [], "Cnd": [], "Prd": []}
        if vocab.is_coord(token):
            coords.append(token)
        elif new in (DecodeState.RCT_TYPE, DecodeState.CND_TYPE, DecodeState.PRD_TYPE):
            x1, y1, x2, y2 = coords
            bbox = BBox(
                dequantize(x1, seq.width, n),
                dequantize(y1, seq.height, n),
                dequantize(x2, seq.width, n),
                dequantize(y2, seq.height, n),
            )
            roles[role_of(new).value].append(Entity(next_id, bbox, vocab.token_type(token)))
            next_id += 1
            coords = []
        elif new is DecodeState.RXN_END:
            reactions.append(ResolvedReaction(roles["Rct"], roles["Cnd"], roles["Prd"]))
        state = new
    status = ParseStatus.CLEAN if state is DecodeState.EOS else ParseStatus.TRUNCATED
    return ParseResult(ReactionStructure(reactions), status)


# --- line-oriented token files -------------------------------------------------


def _fmt_dim(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def format_token_line(image_id: str, seq: TokenSequence) -> str:
    return "\t".join([image_id, _fmt_dim(seq.width), _fmt_dim(seq.height), " ".join(map(str, seq.tokens))])


def parse_token_line(line: str) -> tuple[str, TokenSequence]:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 4:
        raise ValueError(f"expected 4 tab-separated fields, got {len(parts)}")
    image_id, w, h, toks = parts
    return image_id, TokenSequence(tuple(int(t) for t in toks.split()), float(w), float(h))


def write_token_file(path: str | os.PathLike, items: Iterable[tuple[str, TokenSequence]]) -> int:
    lines = [format_token_line(i, s) for i, s in items]
    atomic_write_text(path, "".join(line + "\n" for line in lines))
    return len(lines)


def read_token_file(path: str | os.PathLike) -> dict[str, TokenSequence]:
    out: dict[str, TokenSequence] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                image_id, seq = parse_token_line(line)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            out[image_id] = seq
    return out


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sequence_length(n_entity_slots: int, n_reactions: int) -> int:
    """Three role tokens and [Rxn] per reaction, five per entity slot, one [EOS]."""
    return 5 * n_entity_slots + 4 * n_reactions + 1


def entity_slots(reactions: Sequence[Reaction]) -> int:
    return sum(len(role) for r in reactions for role in r.roles())
