import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppir.dataset import (
    Classification,
    Dataset,
    build_dataset,
    parse_sizes,
    resolve_candidates,
    select_candidate,
    select_candidates_cyclic,
    theta,
)
from ppir.errors import BadSeed, DatasetFormatError, IndexOutOfClass, LambdaTooLarge

sizes_st = st.lists(st.integers(1, 12), min_size=1, max_size=5)


def test_theta_examples():
    assert theta(Classification((8, 3, 5)), 2, 1) == 9
    assert theta(Classification((6, 4, 5)), 3, 1) == 11
    assert theta(Classification((3, 1)), 1, 1) == 1


def test_theta_out_of_class():
    cls = Classification((4, 6))
    with pytest.raises(IndexOutOfClass):
        theta(cls, 1, 5)
    with pytest.raises(IndexOutOfClass):
        theta(cls, 3, 1)


def test_classification_basics():
    cls = Classification((4, 6, 10))
    assert (cls.gamma_total, cls.f, cls.delta) == (3, 20, 60)
    assert list(cls.members(2)) == list(range(5, 11))
    assert cls.class_of(13) == 3


@pytest.mark.parametrize("bad", [(), (0,), (3, -1)])
def test_classification_rejects_empty(bad):
    with pytest.raises(ValueError):
        Classification(bad)


def test_select_candidate_worked_example():
    cls = Classification((4, 6, 10))
    assert select_candidate(cls, 13, 1) == 1
    assert select_candidate(cls, 13, 3) == 13
    assert select_candidate(Classification((4, 6, 10, 12)), 13, 4) == 23


@pytest.mark.parametrize("s", [0, 61, -3])
def test_select_candidate_bad_seed(s):
    with pytest.raises(BadSeed):
        select_candidate(Classification((4, 6, 10)), s, 1)


def test_cyclic_worked_example():
    cls = Classification((4, 6, 10, 12))
    assert select_candidates_cyclic(cls, 13, 3, 2) == (13, 14)
    assert select_candidates_cyclic(cls, 13, 1, 2) == (1, 2)
    assert select_candidates_cyclic(cls, 13, 4, 2) == (23, 24)


def test_cyclic_wrap():
    cls = Classification((4, 6, 10, 12))
    s = next(s for s in range(1, 61) if select_candidate(cls, s, 1) == 4)
    assert select_candidates_cyclic(cls, s, 1, 2) == (4, 1)


def test_cyclic_lambda_too_large():
    with pytest.raises(LambdaTooLarge):
        select_candidates_cyclic(Classification((2, 3)), 1, 1, 3)


def test_resolve_candidates_rows():
    assert resolve_candidates(Classification((4, 6, 10, 12)), 13, 2) == ((1, 2), (6, 7), (13, 14), (23, 24))


@settings(max_examples=60, deadline=None)
@given(sizes_st)
def test_theta_bijection(sizes):
    cls = Classification(tuple(sizes))
    image = [theta(cls, g, b) for g in range(1, len(sizes) + 1) for b in range(1, sizes[g - 1] + 1)]
    assert sorted(image) == list(range(1, cls.f + 1))


@settings(max_examples=60, deadline=None)
@given(sizes_st)
def test_uniform_selection(sizes):
    cls = Classification(tuple(sizes))
    assert cls.delta == math.lcm(*sizes)
    for g in range(1, len(sizes) + 1):
        counts = Counter(select_candidate(cls, s, g) for s in range(1, cls.delta + 1))
        assert set(counts) == set(cls.members(g))
        assert set(counts.values()) == {cls.delta // sizes[g - 1]}


@settings(max_examples=100, deadline=None)
@given(sizes_st, st.data())
def test_cyclic_distinct_in_class(sizes, data):
    cls = Classification(tuple(sizes))
    g = data.draw(st.integers(1, len(sizes)))
    lam = data.draw(st.integers(1, sizes[g - 1]))
    s = data.draw(st.integers(1, cls.delta))
    picked = select_candidates_cyclic(cls, s, g, lam)
    assert len(set(picked)) == lam
    assert all(cls.class_of(m) == g for m in picked)


def test_build_deterministic():
    a = build_dataset([2, 3], 4, seed=5)
    b = build_dataset([2, 3], 4, seed=5)
    assert a == b and hash(a) == hash(b)
    assert a != build_dataset([2, 3], 4, seed=6)


def test_build_example_shape():
    ds = build_dataset([4, 6, 10], 8)
    assert (ds.f, ds.delta, ds.length) == (20, 60, 8)
    assert all(0 <= v < 257 for m in range(1, 21) for v in ds.message(m))


def test_build_degenerate():
    ds = build_dataset([1], 3)
    assert ds.f == 1 and list(ds.classification.members(1)) == [1]


def test_symbols_read_only():
    ds = build_dataset([2], 2)
    with pytest.raises(ValueError):
        ds.symbols[0, 0] = 1


def test_file_roundtrip(tmp_path):
    ds = build_dataset([4, 6, 10], 8, 257, 3)
    path = tmp_path / "d.txt"
    ds.save(path)
    text = path.read_text()
    assert text.startswith("ppir-dataset v1 p=257 L=8 sizes=4,6,10\n")
    assert len(text.splitlines()) == 21
    assert Dataset.load(path) == ds


@pytest.mark.parametrize(
    "text",
    [
        "",
        "nope\n",
        "ppir-dataset v1 p=5 L=2\n1 2\n",
        "ppir-dataset v1 p=5 L=2 sizes=1\n1 2\n3 4\n",
        "ppir-dataset v1 p=5 L=2 sizes=1\n1\n",
        "ppir-dataset v1 p=5 L=2 sizes=1\n1 x\n",
        "ppir-dataset v1 p=5 L=2 sizes=1\n1 9\n",
    ],
)
def test_file_format_errors(text):
    with pytest.raises(DatasetFormatError):
        Dataset.loads(text)


def test_parse_sizes():
    assert parse_sizes("4,6,10") == (4, 6, 10)
    assert parse_sizes("[4, 6]") == (4, 6)
    assert parse_sizes([1, 2]) == (1, 2)
