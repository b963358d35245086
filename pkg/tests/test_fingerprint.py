import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import VALID_SMILES
from vpop.chem import parse_smiles
from vpop.fingerprint import (EmptyTrainSet, Fingerprint, WidthMismatch, ecfp,
                              max_similarity_to_train, similarity_histogram,
                              similarity_report, tanimoto)


def test_identical_molecules_identical_prints():
    a = ecfp(parse_smiles("CCO"))
    b = ecfp(parse_smiles("OCC"))
    assert a.bits == b.bits
    assert tanimoto(a, b) == 1.0


def test_benzene_few_bits():
    # all six atoms share an environment per radius: at most 3 distinct bits
    fp = ecfp(parse_smiles("c1ccccc1"), radius=2, nbits=2048)
    assert 1 <= fp.popcount() <= 3


def test_related_molecules_intermediate_similarity():
    hexane = ecfp(parse_smiles("CCCCCC"))
    heptane = ecfp(parse_smiles("CCCCCCC"))
    benzene = ecfp(parse_smiles("c1ccccc1"))
    close = tanimoto(hexane, heptane)
    far = tanimoto(hexane, benzene)
    assert 0.0 < close < 1.0
    assert far < close


def test_empty_prints_similarity_one():
    a = Fingerprint(0, 64)
    b = Fingerprint(0, 64)
    assert tanimoto(a, b) == 1.0


def test_width_mismatch_raises():
    with pytest.raises(WidthMismatch):
        tanimoto(Fingerprint(1, 64), Fingerprint(1, 128))


def test_max_similarity_to_train():
    train = [ecfp(parse_smiles(s)) for s in ["CCCCCC", "c1ccccc1", "CCO"]]
    probe = ecfp(parse_smiles("CCCCCC"))
    assert max_similarity_to_train(probe, train) == 1.0
    with pytest.raises(EmptyTrainSet):
        max_similarity_to_train(probe, [])


def test_histogram_last_bin_closed():
    rows = similarity_histogram([0.0, 0.29, 0.3, 0.69, 0.7, 1.0, 1.0])
    assert [r["count"] for r in rows] == [2, 1, 1, 3]
    assert rows[-1]["hi"] == 1.0


def test_report_shape():
    train = [ecfp(parse_smiles(s)) for s in VALID_SMILES[:20]]
    val = [ecfp(parse_smiles(s)) for s in VALID_SMILES[20:30]]
    rep = similarity_report(train, {"val": val})
    entry = rep["val"]
    assert entry["n"] == 10
    assert 0.0 <= entry["median"] <= 1.0
    assert sum(r["count"] for r in entry["histogram"]) == 10


def test_to_array_matches_bits():
    fp = ecfp(parse_smiles("CCO"), nbits=128)
    arr = fp.to_array()
    assert arr.sum() == fp.popcount()
    assert all(fp.bits >> i & 1 == int(arr[i]) for i in range(128))


@given(st.integers(min_value=0, max_value=2**64 - 1),
       st.integers(min_value=0, max_value=2**64 - 1))
@settings(max_examples=50)
def test_tanimoto_bounds_property(x, y):
    a, b = Fingerprint(x, 64), Fingerprint(y, 64)
    s = tanimoto(a, b)
    assert 0.0 <= s <= 1.0
    assert tanimoto(a, a) == 1.0
    assert tanimoto(a, b) == tanimoto(b, a)
