import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from photoauthor.errors import BadMagic, DimensionMismatch, DuplicatePhotoId, LengthMismatch, TruncatedFile
from photoauthor.featstore import (AuthorIndex, FeatureMatrix, decode_feature_file, encode_feature_file,
                                   feature_file_size, ingest, read_feature_file, top_rule_classify,
                                   write_feature_file)


def test_single_row_layout(tmp_path):
    m = FeatureMatrix("x", ["a"], np.array([[1.0, 2.0]]))
    write_feature_file(m, tmp_path / "f.pfv")
    raw = (tmp_path / "f.pfv").read_bytes()
    assert len(raw) == 25
    assert raw == b"PFV1" + struct.pack("<III", 2, 1, 1) + b"a" + struct.pack("<ff", 1.0, 2.0)


def test_empty_matrix(tmp_path):
    m = FeatureMatrix.empty("x", 7)
    write_feature_file(m, tmp_path / "e.pfv")
    assert (tmp_path / "e.pfv").stat().st_size == 12
    back = read_feature_file(tmp_path / "e.pfv")
    assert back.dimension == 7 and len(back) == 0


def test_rewrite_is_byte_identical(tmp_path, rng):
    m = FeatureMatrix("x", [f"p{i}" for i in range(5)], rng.normal(size=(5, 9)))
    write_feature_file(m, tmp_path / "1.pfv")
    write_feature_file(read_feature_file(tmp_path / "1.pfv"), tmp_path / "2.pfv")
    assert (tmp_path / "1.pfv").read_bytes() == (tmp_path / "2.pfv").read_bytes()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 40).flatmap(lambda d: st.tuples(
    st.just(d),
    st.lists(st.text(min_size=0, max_size=8), unique=True, max_size=6),
).flatmap(lambda t: st.tuples(
    st.just(t[1]),
    hnp.arrays(np.float32, (len(t[1]), t[0]), elements=st.floats(width=32, allow_nan=False, allow_infinity=False)),
))))
def test_roundtrip_bit_exact(case):
    ids, values = case
    m = FeatureMatrix("x", ids, values)
    buf = encode_feature_file(m)
    assert len(buf) == feature_file_size(ids, values.shape[1])
    back = decode_feature_file(buf, "x")
    assert back.ids == ids
    assert back.values.tobytes() == values.astype("<f4").tobytes()


def test_dim_4096_expected(tmp_path, rng):
    m = FeatureMatrix("C-FC7", ["a", "b"], rng.normal(size=(2, 4096)))
    write_feature_file(m, tmp_path / "f.pfv")
    assert read_feature_file(tmp_path / "f.pfv", expected_dimension=4096).dimension == 4096


def test_dimension_mismatch(tmp_path, rng):
    write_feature_file(FeatureMatrix("fc8", ["a"], rng.normal(size=(1, 1000))), tmp_path / "f.pfv")
    with pytest.raises(DimensionMismatch):
        read_feature_file(tmp_path / "f.pfv", expected_dimension=1183)


def test_truncation_reports_row(rng):
    m = FeatureMatrix("x", ["r0", "r1", "r2"], rng.normal(size=(3, 4)))
    buf = encode_feature_file(m)
    row = 4 + 2 + 16
    for cut, expect in [(12 + row + 5, 1), (12 + 2 * row + 3, 2), (12 + 1, 0)]:
        with pytest.raises(TruncatedFile) as exc:
            decode_feature_file(buf[:cut])
        assert exc.value.row == expect
    with pytest.raises(TruncatedFile):
        decode_feature_file(buf[:8])


def test_bad_magic_and_duplicates(rng):
    buf = bytearray(encode_feature_file(FeatureMatrix("x", ["a"], rng.normal(size=(1, 2)))))
    buf[3:4] = b"2"
    with pytest.raises(BadMagic):
        decode_feature_file(bytes(buf))
    dup = b"PFV1" + struct.pack("<III", 1, 2, 1) + b"a" + struct.pack("<f", 1) + struct.pack("<I", 1) + b"a" + struct.pack("<f", 2)
    with pytest.raises(DuplicatePhotoId):
        decode_feature_file(dup)


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        encode_feature_file(FeatureMatrix("x", ["a"], np.array([[np.nan, 1.0]])))


def test_ingest_renames(tmp_path, rng):
    write_feature_file(FeatureMatrix("raw", ["a", "b"], rng.normal(size=(2, 6))), tmp_path / "raw.pfv")
    m = ingest(tmp_path / "raw.pfv", "H-Pool5", tmp_path / "out.pfv", expected_dimension=6)
    assert m.feature_name == "H-Pool5"
    assert (tmp_path / "raw.pfv").read_bytes() == (tmp_path / "out.pfv").read_bytes()
    with pytest.raises(DimensionMismatch):
        ingest(tmp_path / "raw.pfv", "H-Pool5", tmp_path / "o2.pfv", expected_dimension=9216)


def test_matrix_access(rng):
    v = rng.normal(size=(3, 2))
    m = FeatureMatrix("x", ["a", "b", "c"], v)
    assert "b" in m and "z" not in m
    np.testing.assert_array_equal(m.take(["c", "a"]), v[[2, 0]].astype(np.float32))
    assert m.subset(["b"]).ids == ["b"]
    with pytest.raises(DuplicatePhotoId):
        FeatureMatrix("x", ["a", "a"], v[:2])


# ---- TOP rule

AUTHORS = AuthorIndex(tuple(f"author{i}" for i in range(41)))


def test_top_rule_examples():
    v = np.zeros(41)
    v[7] = 3.0
    assert top_rule_classify(v, AUTHORS) == "author7"
    assert top_rule_classify(np.ones(41), AUTHORS) == "author0"
    with pytest.raises(LengthMismatch):
        top_rule_classify(np.ones(40), AUTHORS)


def test_top_rule_scan_oracle(rng):
    for _ in range(1000):
        v = rng.normal(size=41)
        best = 0
        for j in range(1, 41):
            if v[j] > v[best]:
                best = j
        assert top_rule_classify(v, AUTHORS) == AUTHORS[best]


@given(hnp.arrays(np.float64, 41, elements=st.floats(-1e3, 1e3)), st.floats(-1e3, 1e3))
def test_top_rule_shift_invariant(v, c):
    shifted = v + c
    # shifting may merge values that were distinct only below float resolution
    if len(np.unique(shifted)) == len(np.unique(v)):
        assert top_rule_classify(shifted, AUTHORS) == top_rule_classify(v, AUTHORS)
