"""Training-time augmentation: vertical composition of diagrams plus image transforms.

Every random choice is drawn from the ``numpy.random.Generator`` passed in, in
a fixed order, so a seed fully determines the output.
"""

from __future__ import annotations

import bisect
import math
import os
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from PIL import Image

from .schema import (
    BBox,
    Dataset,
    DiagramRecord,
    Entity,
    InvalidRecordError,
    Reaction,
    Style,
    clip_bbox,
    drop_degenerate,
    renumber_entities,
    validate_record,
)

RGB = tuple[int, int, int]
WHITE: RGB = (255, 255, 255)


@dataclass(frozen=True, eq=False)
class RasterImage:
    """RGB image held as an ``(height, width, 3)`` uint8 array."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) pixels, got shape {px.shape}")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RasterImage) and np.array_equal(self.pixels, other.pixels)

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def blank(cls, width: int, height: int, color: RGB = WHITE) -> RasterImage:
        return cls(np.broadcast_to(np.array(color, np.uint8), (height, width, 3)))

    @classmethod
    def from_pil(cls, im: Image.Image) -> RasterImage:
        return cls(np.asarray(im.convert("RGB")))

    def to_pil(self) -> Image.Image:
        return Image.fromarray(self.pixels, "RGB")

    @classmethod
    def load(cls, path: str | os.PathLike) -> RasterImage:
        with Image.open(path) as im:
            return cls.from_pil(im)

    def save(self, path: str | os.PathLike) -> None:
        self.to_pil().save(path, format="PNG")

    def crop(self, box: BBox) -> np.ndarray:
        """Pixels inside an integer-aligned box."""
        x1, y1, x2, y2 = (int(round(v)) for v in box)
        return self.pixels[y1:y2, x1:x2]


class MissingImageError(FileNotFoundError):
    pass


class DirectoryImageStore:
    """Loads ``root/<file_name>`` on demand and keeps the decoded image."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self._cache: dict[str, RasterImage] = {}

    def __getitem__(self, file_name: str) -> RasterImage:
        if file_name not in self._cache:
            path = self.root / file_name
            if not path.is_file():
                raise MissingImageError(f"image file not found: {path}")
            self._cache[file_name] = RasterImage.load(path)
        return self._cache[file_name]

    def __contains__(self, file_name: str) -> bool:
        return file_name in self._cache or (self.root / file_name).is_file()


@dataclass(frozen=True)
class AugmentConfig:
    compose_probability: float = 0.5
    max_compose: int = 6
    decay_ratio: float = 0.5
    rotation_degrees: tuple[float, float] = (-5.0, 5.0)
    hflip_probability: float = 0.5
    vflip_probability: float = 0.1
    color_jitter: float = 0.2
    target_size: int = 1333
    pad_color: RGB = WHITE
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("compose_probability", "decay_ratio", "hflip_probability", "vflip_probability"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.max_compose < 2:
            raise ValueError(f"max_compose must be >= 2, got {self.max_compose}")
        if self.target_size <= 0:
            raise ValueError(f"target_size must be positive, got {self.target_size}")
        if self.color_jitter < 0 or self.color_jitter > 1:
            raise ValueError(f"color_jitter must lie in [0, 1], got {self.color_jitter}")
        lo, hi = self.rotation_degrees
        if lo > hi:
            raise ValueError(f"empty rotation range {self.rotation_degrees}")


# --- composition ---------------------------------------------------------------


@lru_cache(maxsize=32)
def compose_count_weights(max_compose: int, decay_ratio: float) -> tuple[float, ...]:
    """Probabilities of composing k = 2..max_compose diagrams."""
    w = [decay_ratio ** (k - 2) for k in range(2, max_compose + 1)]
    total = sum(w)
    return tuple(x / total for x in w)


@lru_cache(maxsize=32)
def _cumulative(max_compose: int, decay_ratio: float) -> tuple[float, ...]:
    acc, out = 0.0, []
    for p in compose_count_weights(max_compose, decay_ratio):
        acc += p
        out.append(acc)
    return tuple(out)


def sample_compose_count(config: AugmentConfig, rng: np.random.Generator) -> int:
    cum = _cumulative(config.max_compose, config.decay_ratio)
    i = bisect.bisect_right(cum, rng.random() * cum[-1])
    return 2 + min(i, len(cum) - 1)


_STYLE_RANK = {Style.SINGLE_LINE: 0, Style.MULTIPLE_LINE: 1, Style.TREE: 2, Style.GRAPH: 3}


def _composed_style(styles: Sequence[Style]) -> Style:
    top = max(styles, key=_STYLE_RANK.__getitem__)
    # stacking line diagrams gives a multi-line diagram
    return Style.MULTIPLE_LINE if top is Style.SINGLE_LINE else top


def _check_pair(image: RasterImage, record: DiagramRecord) -> None:
    if (image.width, image.height) != (record.width, record.height):
        raise ValueError(
            f"image {record.image_id}: pixels are {image.width}x{image.height}, "
            f"record says {record.width}x{record.height}"
        )
    violations = validate_record(record)
    if violations:
        raise InvalidRecordError(violations)


def compose_vertical(
    diagrams: Sequence[tuple[RasterImage, DiagramRecord]],
    rng: np.random.Generator,
    pad_color: RGB = WHITE,
    x_offsets: Sequence[int] | None = None,
) -> tuple[RasterImage, DiagramRecord]:
    """Stack diagrams top to bottom.

    Narrower diagrams get a horizontal offset drawn uniformly from the
    feasible integer range, unless ``x_offsets`` fixes them. Entity ids are
    renumbered so they stay unique; reactions keep input order.
    """
    if len(diagrams) < 2:
        raise ValueError(f"composition needs at least 2 diagrams, got {len(diagrams)}")
    for image, record in diagrams:
        _check_pair(image, record)
    width = max(img.width for img, _ in diagrams)
    height = sum(img.height for img, _ in diagrams)
    canvas = np.empty((height, width, 3), np.uint8)
    canvas[:] = np.array(pad_color, np.uint8)

    entities: list[Entity] = []
    reactions: list[Reaction] = []
    y = 0
    for k, (image, record) in enumerate(diagrams):
        slack = width - image.width
        if x_offsets is not None:
            dx = int(x_offsets[k])
            if not 0 <= dx <= slack:
                raise ValueError(f"x offset {dx} outside [0, {slack}] for diagram {k}")
        else:
            dx = int(rng.integers(0, slack + 1))
        canvas[y : y + image.height, dx : dx + image.width] = image.pixels
        moved = renumber_entities(record, start=len(entities))
        entities.extend(replace(e, bbox=e.bbox.translate(dx, y)) for e in moved.entities)
        reactions.extend(moved.reactions)
        y += image.height

    records = [r for _, r in diagrams]
    out = DiagramRecord(
        image_id="+".join(r.image_id for r in records),
        file_name="",
        width=width,
        height=height,
        style=_composed_style([r.style for r in records]),
        entities=tuple(entities),
        reactions=tuple(reactions),
    )
    return RasterImage(canvas), out


# --- geometric and photometric transforms --------------------------------------


def rotate_point(x: float, y: float, degrees: float, cx: float, cy: float) -> tuple[float, float]:
    """Counter-clockwise on screen (y axis pointing down), matching PIL."""
    t = math.radians(degrees)
    c, s = math.cos(t), math.sin(t)
    dx, dy = x - cx, y - cy
    return cx + dx * c + dy * s, cy - dx * s + dy * c


def rotate_bbox(b: BBox, degrees: float, width: float, height: float) -> BBox:
    """Axis-aligned hull of the rotated corners, clipped to the image."""
    cx, cy = width / 2, height / 2
    pts = [rotate_point(x, y, degrees, cx, cy) for x in (b.x1, b.x2) for y in (b.y1, b.y2)]
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    return clip_bbox(BBox(min(xs), min(ys), max(xs), max(ys)), width, height)


def hflip_bbox(b: BBox, width: float) -> BBox:
    return BBox(width - b.x2, b.y1, width - b.x1, b.y2)


def vflip_bbox(b: BBox, height: float) -> BBox:
    return BBox(b.x1, height - b.y2, b.x2, height - b.y1)


def _map_boxes(record: DiagramRecord, fn) -> DiagramRecord:
    return replace(record, entities=tuple(replace(e, bbox=fn(e.bbox)) for e in record.entities))


def _jitter(px: np.ndarray, brightness: float, contrast: float, saturation: float) -> np.ndarray:
    x = px.astype(np.float64) * brightness
    x = np.clip(x, 0, 255)
    gray = x @ np.array([0.299, 0.587, 0.114])
    x = (x - gray.mean()) * contrast + gray.mean()
    x = np.clip(x, 0, 255)
    gray = (x @ np.array([0.299, 0.587, 0.114]))[..., None]
    x = (x - gray) * saturation + gray
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class TransformParams:
    """The random draws of one :func:`transform` call."""

    rotation: float
    hflip: bool
    vflip: bool
    brightness: float
    contrast: float
    saturation: float

    @classmethod
    def draw(cls, config: AugmentConfig, rng: np.random.Generator) -> TransformParams:
        lo, hi = config.rotation_degrees
        rotation = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        hflip = bool(rng.random() < config.hflip_probability)
        vflip = bool(rng.random() < config.vflip_probability)
        a = config.color_jitter
        b, c, s = (float(v) for v in rng.uniform(1 - a, 1 + a, 3))
        return cls(rotation, hflip, vflip, b, c, s)


def apply_transform(
    image: RasterImage,
    record: DiagramRecord,
    params: TransformParams,
    target_size: int,
    pad_color: RGB = WHITE,
) -> tuple[RasterImage, DiagramRecord]:
    """Rotate, flip, jitter, resize the long side to ``target_size``, pad to a square."""
    _check_pair(image, record)
    w, h = image.width, image.height
    px = image.pixels

    if params.rotation != 0:
        px = np.asarray(
            image.to_pil().rotate(params.rotation, resample=Image.BILINEAR, fillcolor=tuple(pad_color))
        )
        record = _map_boxes(record, lambda b: rotate_bbox(b, params.rotation, w, h))
    if params.hflip:
        px = px[:, ::-1]
        record = _map_boxes(record, lambda b: hflip_bbox(b, w))
    if params.vflip:
        px = px[::-1]
        record = _map_boxes(record, lambda b: vflip_bbox(b, h))
    if (params.brightness, params.contrast, params.saturation) != (1.0, 1.0, 1.0):
        px = _jitter(px, params.brightness, params.contrast, params.saturation)

    scale = target_size / max(w, h)
    if scale != 1:
        nw, nh = max(1, round(w * scale)), max(1, round(h * scale))
        px = np.asarray(Image.fromarray(np.ascontiguousarray(px)).resize((nw, nh), Image.BILINEAR))
        record = _map_boxes(record, lambda b: clip_bbox(b.scale(scale), target_size, target_size))

    canvas = np.empty((target_size, target_size, 3), np.uint8)
    canvas[:] = np.array(pad_color, np.uint8)
    canvas[: px.shape[0], : px.shape[1]] = px
    record = drop_degenerate(replace(record, width=target_size, height=target_size))
    return RasterImage(canvas), record


def transform(
    image: RasterImage,
    record: DiagramRecord,
    config: AugmentConfig,
    rng: np.random.Generator,
) -> tuple[RasterImage, DiagramRecord]:
    params = TransformParams.draw(config, rng)
    return apply_transform(image, record, params, config.target_size, config.pad_color)


def augment_sample(
    pool: Dataset,
    images: Mapping[str, RasterImage] | DirectoryImageStore,
    config: AugmentConfig,
    rng: np.random.Generator,
) -> tuple[RasterImage, DiagramRecord]:
    """One training sample: maybe compose several pool diagrams, then transform."""
    if not len(pool):
        raise ValueError("augmentation pool is empty")
    records = pool.records

    def fetch(r: DiagramRecord) -> RasterImage:
        try:
            return images[r.file_name]
        except KeyError:
            raise MissingImageError(f"no image for record {r.image_id} ({r.file_name})") from None

    if rng.random() < config.compose_probability:
        k = sample_compose_count(config, rng)
        picks = [records[int(i)] for i in rng.integers(0, len(records), k)]
        image, record = compose_vertical([(fetch(r), r) for r in picks], rng, config.pad_color)
    else:
        record = records[int(rng.integers(0, len(records)))]
        image = fetch(record)
    return transform(image, record, config, rng)


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for sample ``index``; independent of worker count."""
    return np.random.default_rng([seed, index])
