"""Random diagrams for tests, demos and experiment scripts."""

from __future__ import annotations

import numpy as np

from .augment import RasterImage
from .schema import BBox, Dataset, DiagramRecord, Entity, EntityType, Reaction, Style

_TYPES = list(EntityType)
_STYLES = list(Style)


def random_bbox(
    rng: np.random.Generator, width: int, height: int, integer: bool = True, min_side: float = 0
) -> BBox:
    """Uniform box inside the image; ``min_side`` > 0 bounds both sides from below."""
    if min_side > 0:
        if min_side > min(width, height):
            raise ValueError(f"min_side {min_side} does not fit a {width}x{height} image")
        draw = (lambda lo, hi: float(rng.integers(int(np.ceil(lo)), int(hi) + 1))) if integer else rng.uniform
        x1 = draw(0, width - min_side)
        y1 = draw(0, height - min_side)
        return BBox(float(x1), float(y1), float(draw(x1 + min_side, width)), float(draw(y1 + min_side, height)))
    if integer:
        x1, x2 = sorted(rng.choice(width + 1, 2, replace=False))
        y1, y2 = sorted(rng.choice(height + 1, 2, replace=False))
        return BBox(float(x1), float(y1), float(x2), float(y2))
    x1, x2 = sorted(rng.uniform(0, width, 2))
    y1, y2 = sorted(rng.uniform(0, height, 2))
    return BBox(float(x1), float(y1), float(x2), float(y2))


def _role(rng: np.random.Generator, n_entities: int, lo: int, hi: int) -> tuple[int, ...]:
    k = int(rng.integers(lo, min(hi, n_entities) + 1))
    return tuple(int(i) for i in rng.choice(n_entities, k, replace=False))


def random_record(
    rng: np.random.Generator,
    image_id: str = "0",
    max_reactions: int = 8,
    max_entities: int = 10,
    size_range: tuple[int, int] = (50, 1200),
    integer: bool = False,
    min_reactions: int = 0,
    min_side: float = 0,
) -> DiagramRecord:
    """A valid record with random boxes, types, style and reactions."""
    width = int(rng.integers(size_range[0], size_range[1] + 1))
    height = int(rng.integers(size_range[0], size_range[1] + 1))
    n_entities = int(rng.integers(1, max_entities + 1))
    entities = tuple(
        Entity(k, random_bbox(rng, width, height, integer, min_side), _TYPES[int(rng.integers(3))])
        for k in range(n_entities)
    )
    n_reactions = int(rng.integers(min_reactions, max_reactions + 1))
    reactions = tuple(
        Reaction(_role(rng, n_entities, 1, 3), _role(rng, n_entities, 0, 2), _role(rng, n_entities, 1, 2))
        for _ in range(n_reactions)
    )
    style = _STYLES[int(rng.integers(len(_STYLES)))]
    return DiagramRecord(image_id, f"{image_id}.png", width, height, style, entities, reactions)


def random_dataset(rng: np.random.Generator, n: int, **kwargs) -> Dataset:
    return Dataset(tuple(random_record(rng, str(k), **kwargs) for k in range(n)))


def render(record: DiagramRecord, rng: np.random.Generator) -> RasterImage:
    """White canvas with each entity box filled by random colour noise."""
    px = np.full((record.height, record.width, 3), 255, np.uint8)
    for e in record.entities:
        x1, y1, x2, y2 = (int(round(v)) for v in e.bbox)
        px[y1:y2, x1:x2] = rng.integers(0, 256, (y2 - y1, x2 - x1, 3), dtype=np.uint8)
    return RasterImage(px)
