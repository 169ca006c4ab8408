"""Decoding state machine over the reaction-sequence grammar.

A state names the kind of the token consumed last (``RCT_X1`` means an x1
coordinate of a reactant was just emitted). Only token categories are
constrained; coordinate values are never compared against each other.
"""

from __future__ import annotations

import enum
from functools import lru_cache
from typing import Iterable

import numpy as np

from .vocab import Vocabulary


class Role(enum.Enum):
    RCT = "Rct"
    CND = "Cnd"
    PRD = "Prd"


class DecodeState(enum.Enum):
    START = "Start"
    RCT_X1 = "Rct x1"
    RCT_Y1 = "Rct y1"
    RCT_X2 = "Rct x2"
    RCT_Y2 = "Rct y2"
    RCT_TYPE = "Rct type"
    CND_X1 = "Cnd x1"
    CND_Y1 = "Cnd y1"
    CND_X2 = "Cnd x2"
    CND_Y2 = "Cnd y2"
    CND_TYPE = "Cnd type"
    PRD_X1 = "Prd x1"
    PRD_Y1 = "Prd y1"
    PRD_X2 = "Prd x2"
    PRD_Y2 = "Prd y2"
    PRD_TYPE = "Prd type"
    RCT_END = "[Rct]"
    CND_END = "[Cnd]"
    PRD_END = "[Prd]"
    RXN_END = "[Rxn]"
    EOS = "[EOS]"


S = DecodeState

# field sequence of one entity, per role
_ENTITY_STATES = {
    Role.RCT: (S.RCT_X1, S.RCT_Y1, S.RCT_X2, S.RCT_Y2, S.RCT_TYPE),
    Role.CND: (S.CND_X1, S.CND_Y1, S.CND_X2, S.CND_Y2, S.CND_TYPE),
    Role.PRD: (S.PRD_X1, S.PRD_Y1, S.PRD_X2, S.PRD_Y2, S.PRD_TYPE),
}
_ROLE_END = {Role.RCT: S.RCT_END, Role.CND: S.CND_END, Role.PRD: S.PRD_END}


def role_of(state: DecodeState) -> Role | None:
    for role, states in _ENTITY_STATES.items():
        if state in states:
            return role
    return None


class IllegalTokenError(ValueError):
    def __init__(self, state: DecodeState, token: int, position: int | None = None):
        self.state = state
        self.token = token
        self.position = position
        where = "" if position is None else f" at position {position}"
        super().__init__(f"token {token} not allowed after {state.value}{where}")


# Transition table in terms of token kinds: "coord", "type", or a special name.
def _kind_transitions() -> dict[DecodeState, dict[str, DecodeState]]:
    table: dict[DecodeState, dict[str, DecodeState]] = {}
    new_reactant = _ENTITY_STATES[Role.RCT][0]
    table[S.START] = {"coord": new_reactant, "[EOS]": S.EOS}
    table[S.RXN_END] = {"coord": new_reactant, "[EOS]": S.EOS}
    for role, (x1, y1, x2, y2, typ) in _ENTITY_STATES.items():
        table[x1] = {"coord": y1}
        table[y1] = {"coord": x2}
        table[x2] = {"coord": y2}
        table[y2] = {"type": typ}
        table[typ] = {"coord": x1, f"[{role.value}]": _ROLE_END[role]}
    table[S.RCT_END] = {"coord": S.CND_X1, "[Cnd]": S.CND_END}
    table[S.CND_END] = {"coord": S.PRD_X1}
    table[S.PRD_END] = {"[Rxn]": S.RXN_END}
    return table


_KIND_TABLE = _kind_transitions()


def _token_kind(token: int, vocab: Vocabulary) -> str | None:
    if vocab.is_coord(token):
        return "coord"
    if token in (vocab.mol, vocab.txt, vocab.idt):
        return "type"
    if vocab.n_bins <= token < vocab.size:
        return vocab.name(token)
    return None


@lru_cache(maxsize=64)
def _masks(vocab: Vocabulary) -> dict[DecodeState, np.ndarray]:
    out = {}
    for state, edges in _KIND_TABLE.items():
        mask = np.zeros(vocab.size, dtype=bool)
        for kind in edges:
            if kind == "coord":
                mask[: vocab.n_bins] = True
            elif kind == "type":
                mask[[vocab.mol, vocab.txt, vocab.idt]] = True
            else:
                mask[vocab.special(kind)] = True
        mask.flags.writeable = False
        out[state] = mask
    return out


def allowed_tokens(state: DecodeState, vocab: Vocabulary) -> np.ndarray:
    """Boolean mask over the vocabulary of tokens legal after ``state``.

    The returned array is read-only and shared between calls.
    """
    if state is S.EOS:
        raise ValueError("no token may follow [EOS]")
    return _masks(vocab)[state]


def step(state: DecodeState, token: int, vocab: Vocabulary) -> DecodeState:
    edges = _KIND_TABLE.get(state)
    kind = _token_kind(token, vocab)
    if edges is None or kind not in edges:
        raise IllegalTokenError(state, token)
    return edges[kind]


def run(tokens: Iterable[int], vocab: Vocabulary) -> tuple[DecodeState, int | None]:
    """Feed tokens through the machine.

    Returns the final state and the position of the first illegal token
    (``None`` if every token was legal). Stops at the first violation.
    """
    state = S.START
    for pos, token in enumerate(tokens):
        try:
            state = step(state, int(token), vocab)
        except IllegalTokenError:
            return state, pos
    return state, None


def accepts(tokens, vocab: Vocabulary) -> bool:
    """True iff ``tokens`` is a complete, grammatical sequence ending in [EOS]."""
    tokens = getattr(tokens, "tokens", tokens)
    state, bad = run(tokens, vocab)
    return bad is None and state is S.EOS
