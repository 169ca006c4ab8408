"""Dataset JSON files, summary statistics and cross-validation folds."""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any

import numpy as np

from .codec import atomic_write_text
from .schema import (
    BBox,
    Dataset,
    DiagramRecord,
    Entity,
    EntityType,
    InvalidRecordError,
    Reaction,
    Style,
    clip_bbox,
    validate_dataset,
)


class DatasetFormatError(ValueError):
    """Malformed JSON or a document that does not follow the dataset schema."""


# --- JSON <-> objects ----------------------------------------------------------


def _image_id_to_json(image_id: str) -> int | str:
    # ids are ints on disk; keep strings that would not survive int() unchanged
    try:
        as_int = int(image_id)
    except ValueError:
        return image_id
    return as_int if str(as_int) == image_id else image_id


def record_to_json(r: DiagramRecord) -> dict[str, Any]:
    return {
        "id": _image_id_to_json(r.image_id),
        "file_name": r.file_name,
        "width": r.width,
        "height": r.height,
        "style": r.style.value,
        "entities": [
            {"id": e.id, "bbox": [float(v) for v in e.bbox.as_tuple()], "category": e.etype.value}
            for e in r.entities
        ],
        "reactions": [
            {"reactants": list(x.reactants), "conditions": list(x.conditions), "products": list(x.products)}
            for x in r.reactions
        ],
    }


def record_from_json(obj: dict[str, Any]) -> DiagramRecord:
    where = f"image {obj.get('id', '?')}"
    try:
        return DiagramRecord(
            image_id=str(obj["id"]),
            file_name=str(obj["file_name"]),
            width=_as_int(obj["width"]),
            height=_as_int(obj["height"]),
            style=Style(obj["style"]),
            entities=tuple(
                Entity(int(e["id"]), BBox(*map(float, e["bbox"])), EntityType(e["category"]))
                for e in obj.get("entities", [])
            ),
            reactions=tuple(
                Reaction(
                    tuple(int(i) for i in x.get("reactants", [])),
                    tuple(int(i) for i in x.get("conditions", [])),
                    tuple(int(i) for i in x.get("products", [])),
                )
                for x in obj.get("reactions", [])
            ),
        )
    except KeyError as exc:
        raise DatasetFormatError(f"{where}: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise DatasetFormatError(f"{where}: {exc}") from None


def _as_int(v: Any) -> int:
    if isinstance(v, float) and v.is_integer():
        return int(v)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError(f"expected integer pixel size, got {v!r}")
    return v


def dataset_to_json(dataset: Dataset) -> dict[str, Any]:
    return {"images": [record_to_json(r) for r in dataset]}


def dataset_from_json(doc: Any, validate: bool = True) -> Dataset:
    if not isinstance(doc, dict) or not isinstance(doc.get("images"), list):
        raise DatasetFormatError('expected a JSON object with an "images" list')
    dataset = Dataset(tuple(record_from_json(obj) for obj in doc["images"]))
    if validate:
        violations = validate_dataset(dataset)
        if violations:
            raise InvalidRecordError(violations)
    return dataset


def dumps(dataset: Dataset) -> str:
    return json.dumps(dataset_to_json(dataset), indent=1) + "\n"


def loads(text: str, validate: bool = True) -> Dataset:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return dataset_from_json(doc, validate)


def load(path: str | os.PathLike, validate: bool = True) -> Dataset:
    """Read and validate a dataset file.

    Raises DatasetFormatError for unparseable files and InvalidRecordError
    listing every violation for files that parse but break the rules.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        return loads(text, validate)
    except DatasetFormatError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from None
    except InvalidRecordError as exc:
        raise InvalidRecordError(exc.violations, where=str(path)) from None


def save(dataset: Dataset, path: str | os.PathLike) -> None:
    atomic_write_text(path, dumps(dataset))


# --- statistics ----------------------------------------------------------------


@dataclass(frozen=True)
class StatsRow:
    diagrams: int
    entities: int
    reactions: int

    @property
    def avg_reactions(self) -> Decimal:
        """Reactions per diagram to one decimal, halves rounded away from zero."""
        if not self.diagrams:
            return Decimal("0.0")
        return (Decimal(self.reactions) / Decimal(self.diagrams)).quantize(Decimal("0.1"), ROUND_HALF_UP)


@dataclass(frozen=True)
class DatasetStats:
    per_style: dict[Style, StatsRow]
    overall: StatsRow
    histogram: dict[int, int]

    def to_text(self) -> str:
        cols = [s.value for s in Style] + ["overall"]
        rows = [self.per_style[s] for s in Style] + [self.overall]
        width = max(len(c) for c in cols) + 2
        head = "".ljust(26) + "".join(c.rjust(width) for c in cols)
        out = [head]
        for label, get in (
            ("diagrams", lambda r: r.diagrams),
            ("entities", lambda r: r.entities),
            ("reactions", lambda r: r.reactions),
            ("avg reactions per diagram", lambda r: r.avg_reactions),
        ):
            out.append(label.ljust(26) + "".join(str(get(r)).rjust(width) for r in rows))
        out.append("")
        out.append("reactions per diagram histogram")
        for n, count in sorted(self.histogram.items()):
            out.append(f"{n:>4}  {count}")
        return "\n".join(out)

    def to_dict(self) -> dict:
        def row(r: StatsRow) -> dict:
            return {
                "diagrams": r.diagrams,
                "entities": r.entities,
                "reactions": r.reactions,
                "avg_reactions": float(r.avg_reactions),
            }

        return {
            "per_style": {s.value: row(r) for s, r in self.per_style.items()},
            "overall": row(self.overall),
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def stats(dataset: Dataset) -> DatasetStats:
    per: dict[Style, list[int]] = {s: [0, 0, 0] for s in Style}
    for r in dataset:
        row = per[r.style]
        row[0] += 1
        row[1] += len(r.entities)
        row[2] += len(r.reactions)
    per_style = {s: StatsRow(*v) for s, v in per.items()}
    overall = StatsRow(*(sum(v[k] for v in per.values()) for k in range(3)))
    histogram = dict(sorted(Counter(len(r.reactions) for r in dataset).items()))
    return DatasetStats(per_style, overall, histogram)


# --- folds ---------------------------------------------------------------------


@dataclass(frozen=True)
class FoldAssignment:
    folds: dict[str, int]
    k: int
    seed: int

    def members(self, fold: int) -> list[str]:
        return [i for i, f in self.folds.items() if f == fold]

    def sizes(self) -> list[int]:
        c = Counter(self.folds.values())
        return [c.get(f, 0) for f in range(self.k)]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "folds": [self.members(f) for f in range(self.k)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> FoldAssignment:
        folds = {image_id: f for f, ids in enumerate(doc["folds"]) for image_id in ids}
        return cls(folds, int(doc["k"]), int(doc["seed"]))


def split_folds(dataset: Dataset, k: int = 5, seed: int = 0, stratify_by_style: bool = False) -> FoldAssignment:
    """Seeded shuffle then round-robin assignment; fold sizes differ by at most one.

    With ``stratify_by_style`` each style is shuffled separately and the
    round-robin continues across styles, so the size guarantee still holds.
    """
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if len(dataset) < k:
        raise ValueError(f"cannot split {len(dataset)} records into {k} folds")
    rng = np.random.default_rng(seed)
    ids = [r.image_id for r in dataset]
    if stratify_by_style:
        groups = [[r.image_id for r in dataset if r.style is s] for s in Style]
    else:
        groups = [ids]
    order: list[str] = []
    for g in groups:
        order.extend(g[i] for i in rng.permutation(len(g)))
    return FoldAssignment({image_id: n % k for n, image_id in enumerate(order)}, k, seed)


# --- converter for externally published ground truth ---------------------------

CONVERTER_HELP = """\
Field mapping applied by `rxnseq convert`:

  image list       "images" (a bare top-level list is also accepted)
  image id         "id"            -> id (also "image_id")
  file name        "file_name"     -> file_name
  size             "width","height" -> width, height
  style            "style" or "diagram_type"; values are matched case-
                   insensitively after mapping "single"/"singleline"/
                   "single_line" -> single-line, "multiple"/"multi"/
                   "multiline"/"multiple_line" -> multiple-line,
                   "tree" -> tree, "graph" -> graph. Records without a
                   style get --default-style.
  entities         "bboxes" or "entities", each with
                     "id" (defaults to list position),
                     "bbox" as [x, y, w, h] (--bbox-format xywh, default)
                     or [x1, y1, x2, y2] (--bbox-format xyxy),
                     "category_id" 1/2/3 -> mol/txt/idt, or "category"
                     as a name ("mol"/"molecule", "txt"/"text",
                     "idt"/"identifier").
  reactions        "reactions", each with "reactants", "conditions",
                   "products" as entity id lists ("conditions" optional).

Boxes are clipped to the image. The result is validated like any other
dataset file.
"""

_STYLE_ALIASES = {
    "single": Style.SINGLE_LINE,
    "singleline": Style.SINGLE_LINE,
    "single_line": Style.SINGLE_LINE,
    "single-line": Style.SINGLE_LINE,
    "multiple": Style.MULTIPLE_LINE,
    "multi": Style.MULTIPLE_LINE,
    "multiline": Style.MULTIPLE_LINE,
    "multiple_line": Style.MULTIPLE_LINE,
    "multiple-line": Style.MULTIPLE_LINE,
    "tree": Style.TREE,
    "graph": Style.GRAPH,
}
_CATEGORY_IDS = {1: EntityType.MOL, 2: EntityType.TXT, 3: EntityType.IDT}
_CATEGORY_NAMES = {
    "mol": EntityType.MOL,
    "molecule": EntityType.MOL,
    "txt": EntityType.TXT,
    "text": EntityType.TXT,
    "idt": EntityType.IDT,
    "identifier": EntityType.IDT,
}


def convert_external(doc: Any, bbox_format: str = "xywh", default_style: Style | None = None) -> Dataset:
    images = doc if isinstance(doc, list) else doc.get("images") if isinstance(doc, dict) else None
    if not isinstance(images, list):
        raise DatasetFormatError('expected "images" list or a top-level list')
    records = []
    for k, img in enumerate(images):
        image_id = str(img.get("id", img.get("image_id", k)))
        try:
            width, height = _as_int(img["width"]), _as_int(img["height"])
            raw_style = img.get("style", img.get("diagram_type"))
            if raw_style is None:
                if default_style is None:
                    raise ValueError("no style field and no --default-style given")
                style = default_style
            else:
                style = _STYLE_ALIASES[str(raw_style).strip().lower()]
            entities = []
            for pos, e in enumerate(img.get("bboxes", img.get("entities", []))):
                a, b, c, d = map(float, e["bbox"])
                box = BBox(a, b, a + c, b + d) if bbox_format == "xywh" else BBox(a, b, c, d)
                if "category_id" in e:
                    etype = _CATEGORY_IDS[int(e["category_id"])]
                else:
                    etype = _CATEGORY_NAMES[str(e["category"]).lower()]
                entities.append(Entity(int(e.get("id", pos)), clip_bbox(box, width, height), etype))
            reactions = [
                Reaction(
                    tuple(map(int, x.get("reactants", []))),
                    tuple(map(int, x.get("conditions", []))),
                    tuple(map(int, x.get("products", []))),
                )
                for x in img.get("reactions", [])
            ]
        except (KeyError, ValueError, TypeError) as exc:
            raise DatasetFormatError(f"image {image_id}: cannot convert ({exc!r})") from None
        records.append(
            DiagramRecord(image_id, str(img.get("file_name", "")), width, height, style, tuple(entities), tuple(reactions))
        )
    dataset = Dataset(tuple(records))
    violations = validate_dataset(dataset)
    if violations:
        raise InvalidRecordError(violations)
    return dataset
