"""Token vocabulary and coordinate binning."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .schema import EntityType

SPECIAL_TOKENS = ("[Mol]", "[Txt]", "[Idt]", "[Rct]", "[Cnd]", "[Prd]", "[Rxn]", "[EOS]", "[BOS]", "[Pad]")

DEFAULT_N_BINS = 2000


@dataclass(frozen=True)
class Vocabulary:
    """Coordinate bins occupy ids ``0..n_bins-1``; the ten special tokens follow."""

    n_bins: int = DEFAULT_N_BINS

    def __post_init__(self) -> None:
        if self.n_bins <= 0:
            raise ValueError(f"n_bins must be positive, got {self.n_bins}")

    @property
    def size(self) -> int:
        return self.n_bins + len(SPECIAL_TOKENS)

    def special(self, name: str) -> int:
        return self.n_bins + SPECIAL_TOKENS.index(name)

    @property
    def mol(self) -> int:
        return self.n_bins

    @property
    def txt(self) -> int:
        return self.n_bins + 1

    @property
    def idt(self) -> int:
        return self.n_bins + 2

    @property
    def rct(self) -> int:
        return self.n_bins + 3

    @property
    def cnd(self) -> int:
        return self.n_bins + 4

    @property
    def prd(self) -> int:
        return self.n_bins + 5

    @property
    def rxn(self) -> int:
        return self.n_bins + 6

    @property
    def eos(self) -> int:
        return self.n_bins + 7

    @property
    def bos(self) -> int:
        return self.n_bins + 8

    @property
    def pad(self) -> int:
        return self.n_bins + 9

    def is_coord(self, token: int) -> bool:
        return 0 <= token < self.n_bins

    def type_token(self, etype: EntityType) -> int:
        return {EntityType.MOL: self.mol, EntityType.TXT: self.txt, EntityType.IDT: self.idt}[etype]

    def token_type(self, token: int) -> EntityType:
        try:
            return (EntityType.MOL, EntityType.TXT, EntityType.IDT)[token - self.n_bins]
        except IndexError:
            raise ValueError(f"token {token} is not an entity-type token") from None

    def name(self, token: int) -> str:
        if self.is_coord(token):
            return str(token)
        if self.n_bins <= token < self.size:
            return SPECIAL_TOKENS[token - self.n_bins]
        return f"<unk:{token}>"

    def render(self, tokens) -> str:
        return " ".join(self.name(t) for t in tokens)


def quantize(coord: float, extent: float, n_bins: int) -> int:
    """``floor(coord / extent * n_bins)``, with ``coord == extent`` clamped to the last bin."""
    if extent <= 0:
        raise ValueError(f"extent must be positive, got {extent}")
    if n_bins <= 0:
        raise ValueError(f"n_bins must be positive, got {n_bins}")
    if coord < 0:
        raise ValueError(f"coordinate must be non-negative, got {coord}")
    return min(math.floor(coord / extent * n_bins), n_bins - 1)


def dequantize(bin_id: int, extent: float, n_bins: int) -> float:
    """Pixel coordinate at the center of bin ``bin_id``."""
    if not 0 <= bin_id < n_bins:
        raise ValueError(f"bin {bin_id} outside [0, {n_bins})")
    return (bin_id + 0.5) / n_bins * extent
