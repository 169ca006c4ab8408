import sys
from pathlib import Path

import hypothesis.strategies as st
import pytest

from rxnseq.schema import BBox, Dataset, DiagramRecord, Entity, EntityType, Reaction, Style

TESTS = Path(__file__).parent
FIXTURES = TESTS / "fixtures"
LOOPBACK = FIXTURES / "loopback_server.py"

sys.path.insert(0, str(TESTS))

MOL, TXT, IDT = EntityType.MOL, EntityType.TXT, EntityType.IDT


def simple_record(image_id="1", style=Style.SINGLE_LINE):
    """One reaction: molecule -> (text condition) -> molecule, on a 400x100 image."""
    return DiagramRecord(
        image_id,
        f"{image_id}.png",
        400,
        100,
        style,
        (
            Entity(0, BBox(10, 10, 90, 90), MOL),
            Entity(1, BBox(120, 20, 200, 40), TXT),
            Entity(2, BBox(250, 10, 390, 90), MOL),
        ),
        (Reaction((0,), (1,), (2,)),),
    )


def fig5_pair():
    """Ground truth puts the TMS-bearing molecule among reactants; the prediction calls it a condition."""
    tms = Entity(0, BBox(10, 10, 110, 90), MOL)
    partner = Entity(1, BBox(130, 10, 230, 90), MOL)
    solvent = Entity(2, BBox(260, 5, 340, 25), TXT)
    product = Entity(3, BBox(380, 10, 490, 90), MOL)
    gt = DiagramRecord(
        "fig5", "fig5.png", 500, 100, Style.SINGLE_LINE,
        (tms, partner, solvent, product),
        (Reaction((0, 1), (2,), (3,)),),
    )
    pred = DiagramRecord(
        "fig5", "fig5.png", 500, 100, Style.SINGLE_LINE,
        (tms, partner, solvent, product),
        (Reaction((1,), (0, 2), (3,)),),
    )
    return gt, pred


@pytest.fixture
def record():
    return simple_record()


@pytest.fixture
def fig5():
    return fig5_pair()


@pytest.fixture
def small_dataset():
    a = simple_record("1")
    b = DiagramRecord(
        "2", "2.png", 300, 300, Style.TREE,
        (
            Entity(0, BBox(0, 0, 100, 100), MOL),
            Entity(1, BBox(150, 0, 300, 100), MOL),
            Entity(2, BBox(0, 150, 100, 300), MOL),
            Entity(3, BBox(120, 110, 180, 130), IDT),
        ),
        (Reaction((0,), (), (1,)), Reaction((1,), (3,), (2,))),
    )
    c = DiagramRecord("3", "3.png", 200, 50, Style.GRAPH, (Entity(0, BBox(0, 0, 200, 50), TXT),), ())
    return Dataset((a, b, c))


# --- hypothesis strategies -----------------------------------------------------


@st.composite
def records(draw, max_reactions=8, max_entities=10, integer=False):
    width = draw(st.integers(1, 2000))
    height = draw(st.integers(1, 2000))

    def coord_pair(extent):
        if integer:
            a = draw(st.integers(0, extent))
            b = draw(st.integers(0, extent))
        else:
            a = draw(st.floats(0, extent, allow_nan=False))
            b = draw(st.floats(0, extent, allow_nan=False))
        return min(a, b), max(a, b)

    n = draw(st.integers(1, max_entities))
    entities = []
    for k in range(n):
        x1, x2 = coord_pair(width)
        y1, y2 = coord_pair(height)
        entities.append(Entity(k, BBox(x1, y1, x2, y2), draw(st.sampled_from(list(EntityType)))))

    def ids(lo, hi):
        return st.lists(st.integers(0, n - 1), min_size=lo, max_size=max(lo, min(n, hi)), unique=True).map(tuple)

    reactions = draw(
        st.lists(
            st.builds(Reaction, ids(1, 3), ids(0, 2), ids(1, 3)),
            max_size=max_reactions,
        )
    )
    style = draw(st.sampled_from(list(Style)))
    return DiagramRecord("h", "h.png", width, height, style, tuple(entities), tuple(reactions))
