from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import records, simple_record
from rxnseq.codec import (
    OrderingPolicy,
    ParseStatus,
    TokenSequence,
    decode_tokens,
    encode,
    entity_slots,
    format_token_line,
    order_reactions,
    parse_token_line,
    read_token_file,
    sequence_length,
    write_token_file,
)
from rxnseq.fsm import accepts
from rxnseq.schema import BBox, DiagramRecord, Entity, EntityType, InvalidRecordError, Reaction, Style
from rxnseq.vocab import SPECIAL_TOKENS, Vocabulary, dequantize, quantize

V = Vocabulary(2000)


# --- vocabulary ----------------------------------------------------------------


def test_vocabulary_layout():
    assert V.size == 2010
    assert [V.special(n) for n in SPECIAL_TOKENS] == list(range(2000, 2010))
    assert (V.mol, V.txt, V.idt, V.rct, V.cnd, V.prd, V.rxn, V.eos, V.bos, V.pad) == tuple(range(2000, 2010))
    assert V.name(2004) == "[Cnd]" and V.name(17) == "17"


def test_vocabulary_rejects_no_bins():
    with pytest.raises(ValueError):
        Vocabulary(0)


# --- binning -------------------------------------------------------------------


@pytest.mark.parametrize(
    "coord, extent, n, expected",
    [
        (100, 400, 2000, 500),
        (0, 400, 2000, 0),
        (400, 400, 2000, 1999),  # right edge clamps into the last bin
        (399.9, 400, 2000, 1999),
        (1, 3, 3, 1),
    ],
)
def test_quantize(coord, extent, n, expected):
    assert quantize(coord, extent, n) == expected


@pytest.mark.parametrize("args", [(-1, 400, 2000), (1, 0, 2000), (1, 400, 0)])
def test_quantize_rejects(args):
    with pytest.raises(ValueError):
        quantize(*args)


def test_dequantize_bin_centres():
    # (500 + 0.5) / 2000 * 400 and (0 + 0.5) / 2000 * 400, by hand
    assert dequantize(500, 400, 2000) == pytest.approx(100.1)
    assert dequantize(0, 400, 2000) == pytest.approx(0.1)


@pytest.mark.parametrize("b", [-1, 2000])
def test_dequantize_rejects_out_of_range(b):
    with pytest.raises(ValueError):
        dequantize(b, 400, 2000)


@given(st.floats(0, 1), st.floats(1, 5000), st.integers(1, 4000))
def test_round_trip_within_bin_width(frac, extent, n):
    x = frac * extent
    assert abs(dequantize(quantize(x, extent, n), extent, n) - x) <= extent / n


@given(st.floats(0, 5000), st.floats(0, 5000), st.floats(1, 5000), st.integers(1, 4000))
def test_quantize_monotone(a, b, extent, n):
    a, b = sorted((min(a, extent), min(b, extent)))
    assert quantize(a, extent, n) <= quantize(b, extent, n)


# --- encode --------------------------------------------------------------------


def test_encode_single_reaction_by_hand():
    seq = encode(simple_record(), V)
    # x: floor(x / 400 * 2000), y: floor(y / 100 * 2000)
    assert seq.tokens == (
        50, 200, 450, 1800, V.mol, V.rct,
        600, 400, 1000, 800, V.txt, V.cnd,
        1250, 200, 1950, 1800, V.mol, V.prd,
        V.rxn, V.eos,
    )
    assert len(seq) == 3 * 5 + 3 + 1 + 1
    assert (seq.width, seq.height) == (400, 100)


def test_encode_no_reactions_is_just_eos():
    r = replace(simple_record(), reactions=())
    assert encode(r, V).tokens == (V.eos,)


def test_encode_empty_conditions_keeps_role_token():
    r = replace(simple_record(), reactions=(Reaction((0,), (), (2,)),))
    toks = encode(r, V).tokens
    i = toks.index(V.rct)
    assert toks[i + 1] == V.cnd


def test_encode_emits_no_bos():
    assert V.bos not in encode(simple_record(), V).tokens


def test_encode_rejects_invalid_record():
    bad = replace(simple_record(), reactions=(Reaction((), (), (2,)),))
    with pytest.raises(InvalidRecordError):
        encode(bad, V)


def test_shared_entity_is_re_emitted():
    r = replace(simple_record(), reactions=(Reaction((0,), (), (2,)), Reaction((2,), (1,), (0,))))
    toks = encode(r, V).tokens
    assert toks.count(V.mol) == 4
    assert len(toks) == sequence_length(5, 2)


@settings(max_examples=200)
@given(records())
def test_length_formula(r):
    seq = encode(r, V)
    assert len(seq) == sequence_length(entity_slots(r.reactions), len(r.reactions))


@settings(max_examples=200)
@given(records())
def test_every_encoding_is_grammatical(r):
    assert accepts(encode(r, V), V)


# --- decode --------------------------------------------------------------------


def structures_close(record, parsed, order=None, n_bins=2000):
    expected = record.resolve(order_reactions(record, order or OrderingPolicy.annotated()))
    assert len(parsed) == len(expected)
    tol = (record.width / n_bins, record.height / n_bins)
    for got, want in zip(parsed, expected):
        for grole, wrole in zip(got.roles(), want.roles()):
            assert [e.etype for e in grole] == [e.etype for e in wrole]
            for g, w in zip(grole, wrole):
                for k, (a, b) in enumerate(zip(g.bbox, w.bbox)):
                    assert abs(a - b) <= tol[k % 2]
    return True


@settings(max_examples=200)
@given(records(), st.sampled_from([16, 500, 2000]))
def test_round_trip(r, n_bins):
    vocab = Vocabulary(n_bins)
    parsed = decode_tokens(encode(r, vocab), vocab)
    assert parsed.status is ParseStatus.CLEAN
    assert structures_close(r, parsed.structure, n_bins=n_bins)


def test_decode_eos_only():
    res = decode_tokens(TokenSequence((V.eos,), 10, 10), V)
    assert res.status is ParseStatus.CLEAN and len(res.structure) == 0


def test_decode_truncated_reaction_dropped():
    toks = encode(simple_record(), V).tokens
    res = decode_tokens(TokenSequence(toks[:-2], 400, 100), V)  # ends after [Prd]
    assert res.status is ParseStatus.TRUNCATED
    assert len(res.structure) == 0


def test_decode_keeps_complete_reactions_before_truncation():
    r = replace(simple_record(), reactions=(Reaction((0,), (1,), (2,)), Reaction((2,), (), (0,))))
    toks = encode(r, V).tokens
    res = decode_tokens(TokenSequence(toks[:25], 400, 100), V)
    assert res.status is ParseStatus.TRUNCATED
    assert len(res.structure) == 1


def test_decode_reports_first_invalid_position():
    toks = list(encode(simple_record(), V).tokens)
    toks[3] = V.rxn  # y2 slot of the first entity
    res = decode_tokens(TokenSequence(toks, 400, 100), V)
    assert res.status is ParseStatus.INVALID
    assert res.error_position == 3
    assert len(res.structure) == 0


def test_decode_token_after_eos_is_invalid():
    res = decode_tokens(TokenSequence((V.eos, V.eos), 1, 1), V)
    assert (res.status, res.error_position) == (ParseStatus.INVALID, 1)


@pytest.mark.parametrize("tokens", [(), (5000,), (-1,), (V.bos,), (V.pad,)])
def test_decode_handles_arbitrary_lists(tokens):
    res = decode_tokens(TokenSequence(tokens, 10, 10), V)
    assert len(res.structure) == 0
    assert res.status is (ParseStatus.TRUNCATED if not tokens else ParseStatus.INVALID)


def test_decode_entity_types_and_roles():
    res = decode_tokens(encode(simple_record(), V), V)
    (rxn,) = res.structure
    assert [e.etype for e in rxn.reactants] == [EntityType.MOL]
    assert [e.etype for e in rxn.conditions] == [EntityType.TXT]
    assert [e.etype for e in rxn.products] == [EntityType.MOL]


# --- ordering ------------------------------------------------------------------


def two_row_record():
    ents = (
        Entity(0, BBox(5, 200, 50, 250), EntityType.MOL),
        Entity(1, BBox(100, 200, 150, 250), EntityType.MOL),
        Entity(2, BBox(5, 10, 50, 60), EntityType.MOL),
        Entity(3, BBox(100, 10, 150, 60), EntityType.MOL),
    )
    # annotated bottom row first
    rx = (Reaction((0,), (), (1,)), Reaction((2,), (), (3,)))
    return DiagramRecord("r", "r.png", 300, 300, Style.MULTIPLE_LINE, ents, rx)


def test_reading_order_sorts_top_first():
    r = two_row_record()
    assert order_reactions(r, OrderingPolicy.reading()) == [r.reactions[1], r.reactions[0]]


def test_reading_order_breaks_ties_left_to_right():
    r = two_row_record()
    ents = r.entities + (Entity(4, BBox(0, 10, 4, 60), EntityType.MOL),)
    r = replace(r, entities=ents, reactions=(Reaction((3,), (), (2,)), Reaction((4,), (), (2,))))
    assert order_reactions(r, OrderingPolicy.reading()) == [r.reactions[1], r.reactions[0]]


def test_annotated_order_is_identity():
    r = two_row_record()
    assert order_reactions(r, OrderingPolicy.annotated()) == list(r.reactions)


def test_random_order_is_seeded():
    rng = np.random.default_rng(3)
    from rxnseq.synthetic import random_record

    r = random_record(rng, max_reactions=8, min_reactions=8)
    a = order_reactions(r, OrderingPolicy.random(7))
    assert a == order_reactions(r, OrderingPolicy.random(7))
    assert sorted(map(repr, a)) == sorted(map(repr, r.reactions))
    assert any(order_reactions(r, OrderingPolicy.random(s)) != list(r.reactions) for s in range(5))


def test_random_policy_requires_seed():
    with pytest.raises(ValueError):
        OrderingPolicy("random")
    with pytest.raises(ValueError):
        OrderingPolicy("sideways")


@settings(max_examples=100)
@given(records(), st.sampled_from(["annotated", "reading", "random"]))
def test_round_trip_under_any_order(r, kind):
    order = OrderingPolicy(kind, 11 if kind == "random" else None)
    parsed = decode_tokens(encode(r, V, order), V)
    assert structures_close(r, parsed.structure, order)


# --- token files ---------------------------------------------------------------


def test_token_line_round_trip():
    seq = encode(simple_record(), V)
    line = format_token_line("1", seq)
    assert line.split("\t")[:3] == ["1", "400", "100"]
    assert parse_token_line(line) == ("1", seq)


def test_token_file_round_trip(tmp_path, small_dataset):
    items = [(r.image_id, encode(r, V)) for r in small_dataset]
    path = tmp_path / "t.tsv"
    assert write_token_file(path, items) == 3
    assert read_token_file(path) == dict(items)


def test_token_file_reports_bad_line(tmp_path):
    path = tmp_path / "t.tsv"
    path.write_text("1\t2\t3\n")
    with pytest.raises(ValueError, match=":1:"):
        read_token_file(path)
