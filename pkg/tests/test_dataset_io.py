import json
from dataclasses import replace
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import records, simple_record
from rxnseq.dataset_io import (
    DatasetFormatError,
    FoldAssignment,
    convert_external,
    dumps,
    load,
    loads,
    save,
    split_folds,
    stats,
)
from rxnseq.schema import BBox, Dataset, EntityType, InvalidRecordError, Reaction, Style
from rxnseq.synthetic import random_dataset


def test_round_trip(tmp_path, small_dataset):
    path = tmp_path / "d.json"
    save(small_dataset, path)
    assert load(path) == small_dataset


@settings(max_examples=100)
@given(st.lists(records(), max_size=4))
def test_round_trip_random(recs):
    d = Dataset(tuple(replace(r, image_id=str(k)) for k, r in enumerate(recs)))
    text = dumps(d)
    assert loads(text) == d
    assert dumps(loads(text)) == text  # byte-stable


def test_on_disk_shape(small_dataset):
    doc = json.loads(dumps(small_dataset))
    img = doc["images"][0]
    assert img["id"] == 1 and isinstance(img["id"], int)
    assert list(img) == ["id", "file_name", "width", "height", "style", "entities", "reactions"]
    assert img["entities"][0] == {"id": 0, "bbox": [10.0, 10.0, 90.0, 90.0], "category": "mol"}
    assert img["reactions"][0] == {"reactants": [0], "conditions": [1], "products": [2]}


def test_string_ids_survive():
    d = Dataset((simple_record("07"), simple_record("abc")))
    assert [r.image_id for r in loads(dumps(d))] == ["07", "abc"]


def test_missing_entity_is_named(tmp_path):
    doc = json.loads(dumps(Dataset((simple_record(),))))
    doc["images"][0]["reactions"][0]["products"] = [99]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(InvalidRecordError, match="99") as info:
        load(path)
    assert str(path) in str(info.value)


def test_all_violations_reported():
    doc = json.loads(dumps(Dataset((simple_record("1"), simple_record("2")))))
    doc["images"][0]["reactions"][0]["products"] = [99]
    doc["images"][1]["entities"][0]["bbox"] = [10, 10, 5, 90]
    with pytest.raises(InvalidRecordError) as info:
        loads(json.dumps(doc))
    assert len(info.value.violations) >= 2


def test_empty_dataset():
    d = loads('{"images": []}')
    assert len(d) == 0
    s = stats(d)
    assert s.overall.diagrams == 0 and s.overall.avg_reactions == 0


def test_parse_error_position(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"images": [\n  {"id": 1,,}\n]}')
    with pytest.raises(DatasetFormatError, match="line 2"):
        load(path)


@pytest.mark.parametrize(
    "doc",
    [
        "[]",
        '{"images": {}}',
        '{"images": [{"id": 1}]}',
        '{"images": [{"id": 1, "file_name": "a", "width": 1.5, "height": 2, "style": "tree"}]}',
        '{"images": [{"id": 1, "file_name": "a", "width": 1, "height": 2, "style": "spiral"}]}',
    ],
)
def test_schema_errors(doc):
    with pytest.raises(DatasetFormatError):
        loads(doc)


def test_duplicate_ids_rejected():
    with pytest.raises(InvalidRecordError, match="duplicate"):
        loads(dumps(Dataset((simple_record("1"), simple_record("2")))).replace('"id": 2', '"id": 1'))


# --- stats ---------------------------------------------------------------------


def test_stats_by_hand():
    r = replace(simple_record(), reactions=(Reaction((0,), (1,), (2,)), Reaction((2,), (), (0,))))
    s = stats(Dataset((r,)))
    o = s.overall
    assert (o.diagrams, o.entities, o.reactions, o.avg_reactions) == (1, 3, 2, Decimal("2.0"))
    assert s.histogram == {2: 1}


def test_stats_small_dataset(small_dataset):
    s = stats(small_dataset)
    assert s.per_style[Style.TREE].reactions == 2
    assert s.per_style[Style.MULTIPLE_LINE].diagrams == 0
    assert s.histogram == {0: 1, 1: 1, 2: 1}
    assert "avg reactions per diagram" in s.to_text()
    assert s.to_dict()["overall"]["entities"] == 8


def test_average_rounds_half_up():
    rows = [simple_record(str(k)) for k in range(4)]
    # 1+1+1+2 = 5 reactions over 4 diagrams = 1.25 -> 1.3
    rows[3] = replace(rows[3], reactions=rows[3].reactions * 2)
    assert stats(Dataset(tuple(rows))).overall.avg_reactions == Decimal("1.3")


def test_stats_columns_sum():
    d = random_dataset(np.random.default_rng(0), 60)
    s = stats(d)
    for field in ("diagrams", "entities", "reactions"):
        assert getattr(s.overall, field) == sum(getattr(r, field) for r in s.per_style.values())
    assert sum(s.histogram.values()) == 60


# --- folds ---------------------------------------------------------------------


def numbered(n):
    return Dataset(tuple(simple_record(str(k), style=list(Style)[k % 4]) for k in range(n)))


def test_folds_1378():
    f = split_folds(numbered(1378), 5, seed=0)
    assert sorted(f.sizes()) == [275, 275, 276, 276, 276]


def test_folds_partition_and_determinism():
    d = numbered(103)
    a, b = split_folds(d, 5, 7), split_folds(d, 5, 7)
    assert a == b
    assert sorted(i for k in range(5) for i in a.members(k)) == sorted(r.image_id for r in d)
    assert split_folds(d, 5, 8) != a


def test_two_records_two_folds():
    assert sorted(split_folds(numbered(2), 2).sizes()) == [1, 1]


def test_fold_errors():
    with pytest.raises(ValueError):
        split_folds(numbered(3), 4)
    with pytest.raises(ValueError):
        split_folds(numbered(3), 1)


@given(st.integers(2, 200), st.integers(2, 10), st.integers(0, 1000), st.booleans())
def test_fold_sizes_differ_by_at_most_one(n, k, seed, strat):
    if k > n:
        return
    sizes = split_folds(numbered(n), k, seed, stratify_by_style=strat).sizes()
    assert max(sizes) - min(sizes) <= 1 and sum(sizes) == n


def test_stratified_folds_balance_styles():
    d = numbered(400)
    f = split_folds(d, 5, 0, stratify_by_style=True)
    style = {r.image_id: r.style for r in d}
    for k in range(5):
        counts = [sum(style[i] is s for i in f.members(k)) for s in Style]
        assert max(counts) - min(counts) <= 1


def test_fold_dict_round_trip():
    f = split_folds(numbered(11), 3, 2)
    assert FoldAssignment.from_dict(json.loads(json.dumps(f.to_dict()))) == f


# --- converter -----------------------------------------------------------------


def external_doc():
    return {
        "images": [
            {
                "id": 5,
                "file_name": "5.png",
                "width": 100,
                "height": 50,
                "diagram_type": "Single",
                "bboxes": [
                    {"id": 0, "bbox": [1, 2, 10, 10], "category_id": 1},
                    {"id": 1, "bbox": [20, 2, 10, 5], "category_id": 2},
                    {"id": 2, "bbox": [95, 2, 10, 10], "category": "molecule"},
                ],
                "reactions": [{"reactants": [0], "conditions": [1], "products": [2]}],
            }
        ]
    }


def test_convert_xywh():
    (r,) = convert_external(external_doc())
    assert r.image_id == "5" and r.style is Style.SINGLE_LINE
    assert r.entities[0].bbox == BBox(1, 2, 11, 12)
    assert r.entities[1].etype is EntityType.TXT
    assert r.entities[2].bbox == BBox(95, 2, 100, 12)  # clipped
    assert r.reactions == (Reaction((0,), (1,), (2,)),)


def test_convert_xyxy_and_default_style():
    doc = external_doc()
    del doc["images"][0]["diagram_type"]
    for e in doc["images"][0]["bboxes"]:
        x, y, w, h = e["bbox"]
        e["bbox"] = [x, y, min(x + w, 100), y + h]
    (r,) = convert_external(doc, bbox_format="xyxy", default_style=Style.GRAPH)
    assert r.style is Style.GRAPH
    assert r.entities[0].bbox == BBox(1, 2, 11, 12)
    with pytest.raises(DatasetFormatError, match="style"):
        convert_external(doc, bbox_format="xyxy")


def test_convert_rejects_unknown_category():
    doc = external_doc()
    doc["images"][0]["bboxes"][0]["category_id"] = 9
    with pytest.raises(DatasetFormatError, match="image 5"):
        convert_external(doc)
