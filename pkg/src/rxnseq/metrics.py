"""Hard and soft match evaluation of predicted reaction structures.

Scoring rules:

* Each ground-truth entity is matched to the predicted entity of maximum IoU,
  provided that IoU exceeds the threshold (strictly, unless ``strict=False``).
  Matching is independent per entity, so two ground-truth boxes may share a
  prediction.
* A predicted reaction matches a ground-truth reaction when coverage holds in
  both directions: every ground-truth entity has a match among the
  predictions, and every predicted entity has a match among the ground truth.
  Extra predicted entities therefore make a reaction wrong.
* Hard mode checks coverage role by role. Soft mode keeps molecules only and
  pools reactants with conditions into a single input side.
* Counts are summed over all diagrams before precision and recall are taken
  (micro-average).
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from .schema import BBox, Dataset, Entity, EntityType, ReactionStructure, ResolvedReaction, Style

IOU_THRESHOLD = 0.5


class MatchMode(enum.Enum):
    HARD = "hard"
    SOFT = "soft"


def iou(a: BBox, b: BBox) -> float:
    if a.is_degenerate() or b.is_degenerate():
        raise ValueError(f"IoU undefined for degenerate box: {a if a.is_degenerate() else b}")
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def _overlap(a: BBox, b: BBox) -> float:
    # zero-area boxes cover nothing
    if a.is_degenerate() or b.is_degenerate():
        return 0.0
    return iou(a, b)


def _passes(value: float, threshold: float, strict: bool) -> bool:
    return value > threshold if strict else value >= threshold


def match_entities(
    gt: Sequence[Entity],
    pred: Sequence[Entity],
    threshold: float = IOU_THRESHOLD,
    strict: bool = True,
) -> list[int | None]:
    """Index into ``pred`` of each ground-truth entity's match, or None.

    Ties in IoU go to the earlier prediction.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    out: list[int | None] = []
    for g in gt:
        best, best_iou = None, -1.0
        for j, p in enumerate(pred):
            v = _overlap(g.bbox, p.bbox)
            if v > best_iou:
                best, best_iou = j, v
        out.append(best if best is not None and _passes(best_iou, threshold, strict) else None)
    return out


def _covers(a: Sequence[Entity], b: Sequence[Entity], threshold: float, strict: bool) -> bool:
    return all(m is not None for m in match_entities(a, b, threshold, strict))


def _sides_match(gt_sides, pred_sides, threshold: float, strict: bool) -> bool:
    return all(
        _covers(g, p, threshold, strict) and _covers(p, g, threshold, strict)
        for g, p in zip(gt_sides, pred_sides)
    )


def _soft_sides(r: ResolvedReaction) -> tuple[list[Entity], list[Entity]]:
    mols = lambda role: [e for e in role if e.etype is EntityType.MOL]  # noqa: E731
    return mols(r.reactants) + mols(r.conditions), mols(r.products)


def reaction_match(
    gt: ResolvedReaction,
    pred: ResolvedReaction,
    mode: MatchMode = MatchMode.HARD,
    threshold: float = IOU_THRESHOLD,
    strict: bool = True,
) -> bool:
    if mode is MatchMode.HARD:
        return _sides_match(gt.roles(), pred.roles(), threshold, strict)
    return _sides_match(_soft_sides(gt), _soft_sides(pred), threshold, strict)


@dataclass
class MatchCounts:
    matched_predictions: int = 0
    total_predictions: int = 0
    matched_ground_truth: int = 0
    total_ground_truth: int = 0

    def __add__(self, other: MatchCounts) -> MatchCounts:
        return MatchCounts(
            self.matched_predictions + other.matched_predictions,
            self.total_predictions + other.total_predictions,
            self.matched_ground_truth + other.matched_ground_truth,
            self.total_ground_truth + other.total_ground_truth,
        )

    @property
    def precision(self) -> float:
        return self.matched_predictions / self.total_predictions if self.total_predictions else 0.0

    @property
    def recall(self) -> float:
        return self.matched_ground_truth / self.total_ground_truth if self.total_ground_truth else 0.0

    @property
    def f1(self) -> float:
        return f1_score(self.precision, self.recall)

    def scores(self) -> dict[str, float]:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def diagram_counts(
    gt: ReactionStructure,
    pred: ReactionStructure,
    mode: MatchMode,
    threshold: float = IOU_THRESHOLD,
    strict: bool = True,
) -> MatchCounts:
    hits = [[reaction_match(g, p, mode, threshold, strict) for p in pred] for g in gt]
    return MatchCounts(
        matched_predictions=sum(any(row[j] for row in hits) for j in range(len(pred))),
        total_predictions=len(pred),
        matched_ground_truth=sum(any(row) for row in hits),
        total_ground_truth=len(gt),
    )


@dataclass
class MetricsReport:
    mode: MatchMode
    counts: MatchCounts
    per_style: dict[Style, MatchCounts] = field(default_factory=dict)
    per_diagram: list[tuple[str, MatchCounts]] | None = None

    @property
    def precision(self) -> float:
        return self.counts.precision

    @property
    def recall(self) -> float:
        return self.counts.recall

    @property
    def f1(self) -> float:
        return self.counts.f1

    def to_dict(self) -> dict:
        def row(c: MatchCounts) -> dict:
            return {**c.scores(), **asdict(c)}

        out = {"mode": self.mode.value, **row(self.counts)}
        out["per_style"] = {s.value: row(c) for s, c in self.per_style.items()}
        if self.per_diagram is not None:
            out["per_diagram"] = [{"image_id": i, **row(c)} for i, c in self.per_diagram]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self, by_style: bool = False) -> str:
        def lines(prefix: str, c: MatchCounts) -> list[str]:
            return [
                f"{prefix}precision: {c.precision:.3f}",
                f"{prefix}recall: {c.recall:.3f}",
                f"{prefix}f1: {c.f1:.3f}",
                f"{prefix}matched_predictions: {c.matched_predictions}",
                f"{prefix}total_predictions: {c.total_predictions}",
                f"{prefix}matched_ground_truth: {c.matched_ground_truth}",
                f"{prefix}total_ground_truth: {c.total_ground_truth}",
            ]

        out = [f"mode: {self.mode.value}", *lines("", self.counts)]
        if by_style:
            for style in Style:
                out += lines(f"{style.value}.", self.per_style.get(style, MatchCounts()))
        return "\n".join(out)


class UnknownImageError(KeyError):
    pass


def evaluate(
    gt: Dataset,
    pred: Mapping[str, ReactionStructure],
    mode: MatchMode = MatchMode.HARD,
    threshold: float = IOU_THRESHOLD,
    strict: bool = True,
    keep_per_diagram: bool = False,
) -> MetricsReport:
    """Micro-averaged precision/recall/F1 over every diagram in ``gt``.

    A diagram missing from ``pred`` counts as an empty prediction.
    """
    by_id = gt.by_id()
    unknown = sorted(set(pred) - set(by_id))
    if unknown:
        raise UnknownImageError(f"predictions for unknown image ids: {', '.join(unknown)}")
    total = MatchCounts()
    per_style: dict[Style, MatchCounts] = {}
    per_diagram: list[tuple[str, MatchCounts]] = []
    for record in gt:
        c = diagram_counts(
            record.resolve(), pred.get(record.image_id, ReactionStructure()), mode, threshold, strict
        )
        total = total + c
        per_style[record.style] = per_style.get(record.style, MatchCounts()) + c
        per_diagram.append((record.image_id, c))
    return MetricsReport(mode, total, per_style, per_diagram if keep_per_diagram else None)
