import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpcube.core import (Attribute, AttributeSchema, BitMask, ContingencyVector, DimensionError,
                         Workload, all_kway, dominated_ints, dominates, enumerate_dominated, inner,
                         load_workload, meet, parse_marginal_line, read_spec_file, workload_matrix)


def test_meet_dominates_inner_examples():
    a, b = BitMask.parse("110"), BitMask.parse("011")
    assert str(meet(a, b)) == "010"
    assert str(a & b) == "010"
    assert dominates(BitMask.parse("100"), a)
    assert not dominates(a, BitMask.parse("100"))
    assert inner(a, b) == 1
    assert inner(BitMask.parse("101"), BitMask.parse("101")) == 2


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        meet(BitMask.parse("10"), BitMask.parse("100"))
    with pytest.raises(DimensionError):
        BitMask(8, 3)
    with pytest.raises(DimensionError):
        BitMask(0, 31)


def test_enumerate_dominated_order():
    assert [str(m) for m in enumerate_dominated(BitMask.parse("101"))] == ["000", "001", "100", "101"]
    assert dominated_ints(0) == [0]


@given(st.integers(1, 12).flatmap(lambda d: st.tuples(st.just(d), st.integers(0, (1 << d) - 1))))
def test_dominated_count_and_closure(dd):
    d, a = dd
    subs = dominated_ints(a)
    assert len(subs) == 2 ** bin(a).count("1")
    assert subs == sorted(subs)
    assert all(s & a == s for s in subs)


@given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
def test_meet_lattice_laws(x, y, z):
    a, b, c = (BitMask(v, 8) for v in (x, y, z))
    assert meet(a, b) == meet(b, a)
    assert meet(meet(a, b), c) == meet(a, meet(b, c))
    assert dominates(meet(a, b), a)


def test_schema_layout_msb_first():
    s = AttributeSchema((Attribute("A", 2), Attribute("B", 3), Attribute("C", 2)))
    assert s.d == 4
    assert str(s.mask_for(["B"])) == "0110"
    assert s.cell_index([1, 2, 0]) == 0b1100
    with pytest.raises(KeyError):
        s.index("Z")


def test_schema_rejects_wide_and_bad_attributes():
    with pytest.raises(DimensionError):
        AttributeSchema(tuple(Attribute(f"a{i}", 2) for i in range(31)))
    with pytest.raises(ValueError):
        Attribute("A", 1)
    with pytest.raises(ValueError):
        AttributeSchema((Attribute("A", 2), Attribute("A", 2)))


def test_contingency_vector_validation():
    x = ContingencyVector(np.arange(8.0))
    assert x.d == 3 and x.total == 28.0
    with pytest.raises(DimensionError):
        ContingencyVector(np.ones(6))
    with pytest.raises(ValueError):
        ContingencyVector(np.array([1.0, np.nan]))


def test_workload_matrix_fig1(toy_workload, toy_x):
    Q = workload_matrix(toy_workload)
    assert Q.shape == (6, 8)
    assert np.allclose(Q @ toy_x, [4, 1, 3, 1, 0, 1])
    assert toy_workload.q == 6
    assert [sl.stop - sl.start for sl in toy_workload.marginal_slices()] == [2, 4]


def test_workload_validation():
    with pytest.raises(ValueError):
        Workload(d=3, marginals=(4, 4))
    with pytest.raises(ValueError):
        Workload(d=3, marginals=())
    with pytest.raises(DimensionError):
        Workload(d=3, marginals=(8,))
    with pytest.raises(ValueError):
        Workload(d=2, marginals=(1,), weights=[1.0, -1.0])
    dense = Workload.dense(np.ones((2, 4)))
    assert dense.d == 2 and not dense.is_marginal


def test_all_kway():
    assert all_kway(3, 2) == [3, 5, 6]
    assert len(all_kway(10, 3)) == 120


def test_parse_marginal_line():
    s = AttributeSchema((Attribute("A", 2), Attribute("B", 2), Attribute("C", 2)))
    assert parse_marginal_line("A, B", s, 3) == 0b110
    assert parse_marginal_line("101", s, 3) == 0b101
    assert parse_marginal_line("{}", s, 3) == 0
    with pytest.raises(KeyError):
        parse_marginal_line("A, Z", s, 3)


def test_spec_file_directives(tmp_path):
    s = AttributeSchema((Attribute("A", 2), Attribute("B", 2), Attribute("C", 2)))
    p = tmp_path / "strategy.txt"
    p.write_text("kind: marginals\nA B C  # full table\nassign: A -> A B C\n")
    spec = read_spec_file(p, s)
    assert spec.kind == "marginals" and spec.marginals == [7] and spec.assign == {4: 7}
    bad = tmp_path / "bad.txt"
    bad.write_text("A\nQ\n")
    with pytest.raises(ValueError, match=r"bad.txt:2"):
        load_workload(bad, s)
