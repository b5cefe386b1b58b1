from __future__ import annotations

import csv
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advtransfer.corpus import (
    POS_TAGS,
    CorpusError,
    Dataset,
    Example,
    Token,
    assign_pos,
    load_dataset,
    read_pos_lexicon,
    tokenize,
    train_test_split,
)


def shipped_tags() -> dict[str, set[str]]:
    """Read the shipped POS file directly, without the package's reader."""
    ref = resources.files("advtransfer.data").joinpath("pos_lexicon.tsv")
    tags: dict[str, set[str]] = {}
    with resources.as_file(ref) as path, open(path, encoding="utf-8") as fh:
        for word, tag in csv.reader(fh, delimiter="\t"):
            tags.setdefault(word, set()).add(tag)
    return tags


def test_load_two_line_file(tmp_path):
    p = tmp_path / "c.tsv"
    p.write_text("pos\ta fine film\nneg\ta dull film\n", encoding="utf-8")
    d = load_dataset(p)
    assert d.labels == ("pos", "neg")
    assert [len(e.tokens) for e in d.train] == [3, 3]
    assert [e.id for e in d.train] == [0, 1]
    assert [e.label for e in d.train] == [0, 1]


def test_empty_corpus(tmp_path):
    p = tmp_path / "c.tsv"
    p.write_text("", encoding="utf-8")
    with pytest.raises(CorpusError, match="empty corpus"):
        load_dataset(p)


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "c.tsv"
    p.write_text("pos\tok text\nno tab here\n", encoding="utf-8")
    with pytest.raises(CorpusError, match=":2:"):
        load_dataset(p)


def test_unknown_label_with_sidecar(tmp_path):
    p = tmp_path / "c.tsv"
    p.write_text("pos\tgood\nmeh\tfine\n", encoding="utf-8")
    (tmp_path / "c.tsv.labels").write_text("pos\nneg\n", encoding="utf-8")
    with pytest.raises(CorpusError, match="unknown label 'meh'"):
        load_dataset(p)


def test_sidecar_defines_class_order(tmp_path):
    p = tmp_path / "c.tsv"
    p.write_text("pos\tgood\nneg\tbad\n", encoding="utf-8")
    (tmp_path / "c.tsv.labels").write_text("neg\npos\n", encoding="utf-8")
    d = load_dataset(p)
    assert d.labels == ("neg", "pos")
    assert [e.label for e in d.train] == [1, 0]


def test_tsv_dir_layout(tmp_path):
    (tmp_path / "train.tsv").write_text("a\tx y\nb\ty z\n", encoding="utf-8")
    (tmp_path / "test.tsv").write_text("b\tz\n", encoding="utf-8")
    d = load_dataset(tmp_path, "tsv-dir")
    assert len(d.train) == 2 and len(d.test) == 1
    assert d.test[0].id == 2


def test_dataset_invariants():
    ex = Example(0, (Token("a", "OTHER", 0),), 0)
    with pytest.raises(CorpusError):
        Dataset("x", ("only",), (ex,))
    with pytest.raises(CorpusError):
        Dataset("x", ("a", "b"), (Example(0, ex.tokens, 2),))
    with pytest.raises(CorpusError):
        Dataset("x", ("a", "b"), (ex,), (ex,))


def test_tokenize_matches_shipped_lexicon():
    tags = shipped_tags()
    toks = tokenize("A fine film.")
    assert [t.surface for t in toks] == ["a", "fine", "film", "."]
    assert [t.position for t in toks] == [0, 1, 2, 3]
    assert toks[1].pos == "ADJ" and "ADJ" in tags["fine"]
    assert toks[2].pos == "NOUN" and "NOUN" in tags["film"]
    assert toks[3].pos == "OTHER"
    assert toks[0].pos == ("OTHER" if "a" not in tags else toks[0].pos)


def test_tokenize_edge_cases():
    assert tokenize("") == []
    assert [t.surface for t in tokenize("Film film FILM")] == ["film"] * 3


def test_assign_pos():
    assert "ADJ" in shipped_tags()["brilliant"]
    assert assign_pos("brilliant") == "ADJ"
    assert assign_pos("zzxqv") == "OTHER"
    assert assign_pos("film", {"film": "NOUN"}) == "NOUN"


def test_pos_priority(tmp_path):
    p = tmp_path / "pos.tsv"
    p.write_text("film\tVERB\nfilm\tNOUN\nfast\tADV\nfast\tADJ\n", encoding="utf-8")
    table = read_pos_lexicon(p)
    assert table == {"film": "NOUN", "fast": "ADJ"}


def test_load_is_deterministic(tmp_path):
    p = tmp_path / "c.tsv"
    p.write_text("pos\tA fine, fine film!\nneg\tthe plot is dull\n", encoding="utf-8")
    assert load_dataset(p) == load_dataset(p)


def test_split_keeps_ids_disjoint(tmp_path):
    p = tmp_path / "c.tsv"
    p.write_text("".join(f"{'ab'[i % 2]}\tword{i} film\n" for i in range(20)), encoding="utf-8")
    d = train_test_split(load_dataset(p), 0.25, seed=3)
    assert len(d.test) == 5
    assert not {e.id for e in d.train} & {e.id for e in d.test}
    assert d == train_test_split(load_dataset(p), 0.25, seed=3)


_text = st.text(alphabet=st.sampled_from(list("abcdefgh XYZ.,!?'-\t")), max_size=60)


@settings(max_examples=200, deadline=None)
@given(_text)
def test_round_trip_and_closure(text):
    toks = tokenize(text)
    assert [t.position for t in toks] == list(range(len(toks)))
    assert all(t.surface and t.surface == t.surface.lower() for t in toks)
    assert all(t.pos in POS_TAGS for t in toks)
    again = tokenize(" ".join(t.surface for t in toks))
    assert [t.surface for t in again] == [t.surface for t in toks]
