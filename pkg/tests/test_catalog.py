import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_catalog
from photoauthor.catalog import (PHOTOGRAPHER_COUNTS, Catalog, PhotoRecord, SplitAssignment,
                                 load_manifest, make_splits, validate_against_table, write_manifest)
from photoauthor.errors import DuplicatePhotoId, EmptyManifest, MalformedLine, TooFewRecords


def write_lines(path, objs):
    path.write_text("".join(json.dumps(o) + "\n" for o in objs), encoding="utf-8")
    return path


def test_table_totals():
    assert len(PHOTOGRAPHER_COUNTS) == 41
    assert sum(PHOTOGRAPHER_COUNTS.values()) == 181_948
    assert PHOTOGRAPHER_COUNTS["Adams"] == 245
    assert PHOTOGRAPHER_COUNTS["Highsmith"] == 28475


def test_full_scale_manifest(tmp_path):
    path = tmp_path / "m.jsonl"
    with open(path, "w") as fh:
        for author, n in PHOTOGRAPHER_COUNTS.items():
            for i in range(n):
                fh.write(json.dumps({"photo_id": f"{author}/{i}", "author_id": author, "path": f"{i}.jpg"}) + "\n")
    cat = load_manifest(path)
    assert len(cat) == 181_948
    assert len(cat.authors) == 41
    assert validate_against_table(cat, PHOTOGRAPHER_COUNTS).passed


def test_three_line_counts(tmp_path):
    p = write_lines(tmp_path / "m.jsonl", [
        {"photo_id": "1", "author_id": "A", "path": "a.jpg"},
        {"photo_id": "2", "author_id": "A", "path": "b.jpg", "width": 10, "height": 20},
        {"photo_id": "3", "author_id": "B", "path": "c.jpg", "title": "t"},
    ])
    assert load_manifest(p).author_counts == {"A": 2, "B": 1}


def test_duplicate_id(tmp_path):
    rec = {"photo_id": "x", "author_id": "Adams", "path": "a.jpg"}
    with pytest.raises(DuplicatePhotoId):
        load_manifest(write_lines(tmp_path / "m.jsonl", [rec, rec]))


def test_malformed_reports_line(tmp_path):
    p = tmp_path / "m.jsonl"
    p.write_text('{"photo_id": "1", "author_id": "A", "path": "a"}\n\n{"photo_id": 2}\n')
    with pytest.raises(MalformedLine) as exc:
        load_manifest(p)
    assert exc.value.lineno == 3
    p.write_text('{"photo_id": "1", "author_id": "A", "path": "a", "width": 0}\n')
    with pytest.raises(MalformedLine):
        load_manifest(p)
    p.write_text("not json\n")
    with pytest.raises(MalformedLine):
        load_manifest(p)


def test_empty_manifest(tmp_path):
    p = tmp_path / "m.jsonl"
    p.write_text("\n\n")
    with pytest.raises(EmptyManifest):
        load_manifest(p)


def test_validate_table():
    cat = make_catalog({"Adams": 245, "Highsmith": 28475})
    rep = validate_against_table(cat, {"Adams": 245, "Highsmith": 28475})
    assert rep.passed
    short = make_catalog({"Adams": 244})
    rep = validate_against_table(short, {"Adams": 245})
    assert not rep.passed and rep.mismatches == [("Adams", 245, 244)]
    assert "MISMATCH" in str(rep)
    assert validate_against_table(short, {}).passed


def test_catalog_invariants():
    with pytest.raises(DuplicatePhotoId):
        Catalog.from_records([PhotoRecord("a", "A", "p"), PhotoRecord("a", "B", "q")])
    with pytest.raises(ValueError):
        Catalog((PhotoRecord("a", "A", "p"),), {"A": 2})


def test_split_sizes_n100():
    for seed in range(5):
        s = make_splits(make_catalog({"A": 60, "B": 40}), seed)
        assert (len(s.test), len(s.validation), len(s.train)) == (10, 9, 81)


def test_split_deterministic_and_seed_sensitive():
    cat = make_catalog({"A": 600, "B": 400})
    assert make_splits(cat, 1) == make_splits(cat, 1)
    a, b = make_splits(cat, 1), make_splits(cat, 2)
    assert sum(a.assignment[p] != b.assignment[p] for p in a.assignment) > 0


def test_too_few_records():
    with pytest.raises(TooFewRecords):
        make_splits(make_catalog({"A": 9}), 0)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(10, 3000), seed=st.integers(0, 2 ** 32 - 1))
def test_split_partition(n, seed):
    cat = make_catalog({"A": n})
    s = make_splits(cat, seed)
    test, val, train = set(s.test), set(s.validation), set(s.train)
    assert not (test & val) and not (test & train) and not (val & train)
    assert test | val | train == {r.photo_id for r in cat.records}
    n_test = int(np.floor(0.1 * n + 0.5))
    assert len(test) == n_test
    assert len(val) == int(np.floor(0.1 * (n - n_test) + 0.5))


def test_training_ids_validation_mode():
    s = make_splits(make_catalog({"A": 100}), 0)
    assert set(s.training_ids()) == set(s.train) | set(s.validation)
    assert set(s.training_ids(exclude_validation=True)) == set(s.train)


def test_split_file_roundtrip(tmp_path):
    cat = make_catalog({"A": 7, "B": 8})
    s = make_splits(cat, 42)
    s.save(tmp_path / "s.tsv")
    back = SplitAssignment.load(tmp_path / "s.tsv")
    assert back == s and back.seed == 42 and back.labels == cat.labels()
    (tmp_path / "two.tsv").write_text("#seed\t3\na\ttrain\nb\ttest\n")
    two = SplitAssignment.load(tmp_path / "two.tsv")
    assert two.labels is None and two.test == ["b"]


_text = st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(_text, st.sampled_from(["A", "B", "C"]), _text,
                          st.one_of(st.none(), st.integers(1, 5000)), st.one_of(st.none(), _text)),
                min_size=1, max_size=15, unique_by=lambda t: t[0]))
def test_manifest_write_read_identity(tmp_path_factory, rows):
    recs = [PhotoRecord(pid, a, path, width=w, height=w, summary=s) for pid, a, path, w, s in rows]
    cat = Catalog.from_records(recs)
    p = tmp_path_factory.mktemp("m") / "m.jsonl"
    write_manifest(cat, p)
    assert load_manifest(p) == cat
