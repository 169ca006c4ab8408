"""Domain types for reaction diagrams.

Every type here is an immutable value object. Coordinates are floating-point
pixels with the origin at the top-left corner of the image; quantization only
happens in :mod:`rxnseq.codec`.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterator, Sequence


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.height)

    def is_degenerate(self) -> bool:
        return self.x1 >= self.x2 or self.y1 >= self.y2

    def translate(self, dx: float, dy: float) -> BBox:
        return BBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)

    def scale(self, sx: float, sy: float | None = None) -> BBox:
        sy = sx if sy is None else sy
        return BBox(self.x1 * sx, self.y1 * sy, self.x2 * sx, self.y2 * sy)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def __iter__(self) -> Iterator[float]:
        return iter(self.as_tuple())


class EntityType(enum.Enum):
    MOL = "mol"
    TXT = "txt"
    IDT = "idt"


class Style(enum.Enum):
    SINGLE_LINE = "single-line"
    MULTIPLE_LINE = "multiple-line"
    TREE = "tree"
    GRAPH = "graph"


@dataclass(frozen=True)
class Entity:
    id: int
    bbox: BBox
    etype: EntityType


@dataclass(frozen=True)
class Reaction:
    """A reaction as three role lists of entity ids."""

    reactants: tuple[int, ...]
    conditions: tuple[int, ...] = ()
    products: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        # accept lists from callers, store tuples
        for name in ("reactants", "conditions", "products"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def roles(self) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
        return (self.reactants, self.conditions, self.products)


ROLE_NAMES = ("reactants", "conditions", "products")


@dataclass(frozen=True)
class ResolvedReaction:
    """A reaction whose role lists hold the entities themselves.

    This is the form the decoder produces and the metrics consume; it needs no
    enclosing diagram to be interpreted.
    """

    reactants: tuple[Entity, ...]
    conditions: tuple[Entity, ...] = ()
    products: tuple[Entity, ...] = ()

    def __post_init__(self) -> None:
        for name in ROLE_NAMES:
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def roles(self) -> tuple[tuple[Entity, ...], tuple[Entity, ...], tuple[Entity, ...]]:
        return (self.reactants, self.conditions, self.products)

    def entities(self) -> tuple[Entity, ...]:
        return self.reactants + self.conditions + self.products

    def signature(self) -> tuple[frozenset, frozenset, frozenset]:
        """Per-role multisets of (box, type), ignoring entity ids and order."""
        return tuple(
            frozenset(Counter((e.bbox.as_tuple(), e.etype) for e in role).items())
            for role in self.roles()
        )


@dataclass(frozen=True)
class ReactionStructure:
    reactions: tuple[ResolvedReaction, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "reactions", tuple(self.reactions))

    def __len__(self) -> int:
        return len(self.reactions)

    def __iter__(self) -> Iterator[ResolvedReaction]:
        return iter(self.reactions)

    def __getitem__(self, i: int) -> ResolvedReaction:
        return self.reactions[i]


@dataclass(frozen=True)
class DiagramRecord:
    image_id: str
    file_name: str
    width: int
    height: int
    style: Style
    entities: tuple[Entity, ...] = ()
    reactions: tuple[Reaction, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "reactions", tuple(self.reactions))

    def entity_map(self) -> dict[int, Entity]:
        return {e.id: e for e in self.entities}

    def resolve(self, reactions: Sequence[Reaction] | None = None) -> ReactionStructure:
        """Replace entity ids by entities; ``reactions`` overrides the stored order."""
        lookup = self.entity_map()
        reactions = self.reactions if reactions is None else reactions
        return ReactionStructure(
            tuple(
                ResolvedReaction(*(tuple(lookup[i] for i in role) for role in r.roles()))
                for r in reactions
            )
        )

    def with_structure(self, structure: ReactionStructure) -> DiagramRecord:
        return record_from_structure(
            structure, self.image_id, self.file_name, self.width, self.height, self.style
        )


@dataclass(frozen=True)
class Dataset:
    records: tuple[DiagramRecord, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[DiagramRecord]:
        return iter(self.records)

    def by_id(self) -> dict[str, DiagramRecord]:
        return {r.image_id: r for r in self.records}


@dataclass(frozen=True)
class Violation:
    subject: str
    rule: str

    def __str__(self) -> str:
        return f"{self.subject}: {self.rule}"


class InvalidRecordError(ValueError):
    def __init__(self, violations: Sequence[Violation], where: str = ""):
        self.violations = list(violations)
        prefix = f"{where}: " if where else ""
        super().__init__(prefix + "; ".join(str(v) for v in self.violations))


def validate_record(record: DiagramRecord) -> list[Violation]:
    """Check a record against the annotation rules. Returns [] when valid."""
    out: list[Violation] = []
    img = f"image {record.image_id}"
    if not record.width > 0 or not record.height > 0:
        out.append(Violation(img, "non-positive image size"))

    seen: Counter[int] = Counter(e.id for e in record.entities)
    for eid, n in seen.items():
        if n > 1:
            out.append(Violation(f"{img} entity {eid}", "duplicate entity id"))

    for e in record.entities:
        subj = f"{img} entity {e.id}"
        b = e.bbox
        if e.id < 0:
            out.append(Violation(subj, "negative entity id"))
        if b.x2 < b.x1 or b.y2 < b.y1:
            out.append(Violation(subj, "degenerate bbox"))
        if min(b.as_tuple()) < 0:
            out.append(Violation(subj, "negative coordinate"))
        elif record.width > 0 and record.height > 0 and (b.x2 > record.width or b.y2 > record.height):
            out.append(Violation(subj, "bbox outside image"))

    known = set(seen)
    for k, r in enumerate(record.reactions):
        subj = f"{img} reaction {k}"
        if not r.reactants:
            out.append(Violation(subj, "reactants empty"))
        if not r.products:
            out.append(Violation(subj, "products empty"))
        for name, role in zip(ROLE_NAMES, r.roles()):
            for eid, n in Counter(role).items():
                if eid not in known:
                    out.append(Violation(subj, f"unknown entity id {eid} in {name}"))
                if n > 1:
                    out.append(Violation(subj, f"entity id {eid} repeated in {name}"))
    return out


def validate_dataset(dataset: Dataset) -> list[Violation]:
    out: list[Violation] = []
    for image_id, n in Counter(r.image_id for r in dataset).items():
        if n > 1:
            out.append(Violation(f"image {image_id}", "duplicate image id"))
    for record in dataset:
        out.extend(validate_record(record))
    return out


def require_valid(record: DiagramRecord) -> DiagramRecord:
    violations = validate_record(record)
    if violations:
        raise InvalidRecordError(violations)
    return record


def clip_bbox(b: BBox, width: float, height: float) -> BBox:
    """Intersect ``b`` with the image rectangle. The result may be degenerate."""
    if not (width > 0 and height > 0):
        raise ValueError(f"image size must be positive, got {width}x{height}")

    def clamp(v: float, hi: float) -> float:
        return min(max(v, 0.0), hi)

    return BBox(clamp(b.x1, width), clamp(b.y1, height), clamp(b.x2, width), clamp(b.y2, height))


def record_from_structure(
    structure: ReactionStructure,
    image_id: str,
    file_name: str,
    width: int,
    height: int,
    style: Style,
) -> DiagramRecord:
    """Build a record from resolved reactions.

    Entities with identical box and type are merged into one id, so an entity
    shared by several reactions is stored once.
    """
    ids: dict[tuple, int] = {}
    entities: list[Entity] = []
    reactions: list[Reaction] = []
    for rxn in structure:
        roles = []
        for role in rxn.roles():
            role_ids: list[int] = []
            for e in role:
                key = (e.bbox.as_tuple(), e.etype)
                if key not in ids:
                    ids[key] = len(entities)
                    entities.append(Entity(ids[key], e.bbox, e.etype))
                if ids[key] not in role_ids:
                    role_ids.append(ids[key])
            roles.append(tuple(role_ids))
        reactions.append(Reaction(*roles))
    return DiagramRecord(image_id, file_name, width, height, style, tuple(entities), tuple(reactions))


def renumber_entities(record: DiagramRecord, start: int = 0) -> DiagramRecord:
    """Relabel entity ids as ``start, start+1, ...`` in entity order."""
    mapping = {e.id: start + k for k, e in enumerate(record.entities)}
    return replace(
        record,
        entities=tuple(replace(e, id=mapping[e.id]) for e in record.entities),
        reactions=tuple(
            Reaction(*(tuple(mapping[i] for i in role) for role in r.roles()))
            for r in record.reactions
        ),
    )


def drop_degenerate(record: DiagramRecord) -> DiagramRecord:
    """Remove zero-area entities and the reactions they leave without reactants or products."""
    keep = {e.id for e in record.entities if not e.bbox.is_degenerate()}
    if len(keep) == len(record.entities):
        return record
    reactions = []
    for r in record.reactions:
        pruned = Reaction(*(tuple(i for i in role if i in keep) for role in r.roles()))
        if pruned.reactants and pruned.products:
            reactions.append(pruned)
    return replace(
        record,
        entities=tuple(e for e in record.entities if e.id in keep),
        reactions=tuple(reactions),
    )

