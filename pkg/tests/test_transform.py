import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dpcube.core import DimensionError, dominated_ints
from dpcube.transform import (basis_marginal_entry, compute_marginal, fourier_marginal_matrix,
                              fwht, marginal_from_coeffs)

from oracle import naive_hadamard, naive_marginal


def test_fwht_examples(toy_x):
    assert np.allclose(fwht([1, 0, 0, 0]), 0.5)
    assert fwht(toy_x)[0] == pytest.approx(5 * 2 ** -1.5, abs=1e-12)
    assert np.array_equal(fwht(np.zeros(16)), np.zeros(16))
    with pytest.raises(DimensionError):
        fwht(np.ones(6))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 9).flatmap(lambda d: arrays(float, 1 << d, elements=st.floats(-1e3, 1e3))))
def test_fwht_matches_oracle_and_is_involution(x):
    assert np.allclose(fwht(x), naive_hadamard(x), atol=1e-9)
    assert np.allclose(fwht(fwht(x)), x, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 8).flatmap(lambda d: st.tuples(arrays(np.int64, 1 << d, elements=st.integers(0, 1000)),
                                                     st.integers(0, (1 << d) - 1))))
def test_marginal_matches_oracle_and_fourier_path(case):
    x, a = case
    x = x.astype(float)
    m = compute_marginal(a, x)
    assert np.array_equal(m, naive_marginal(a, x))
    assert np.allclose(marginal_from_coeffs(a, fwht(x)), m, atol=1e-9)
    assert m.sum() == pytest.approx(x.sum())


def test_toy_marginals(toy_x):
    assert np.array_equal(compute_marginal(0b110, toy_x), [3, 1, 0, 1])
    assert np.array_equal(compute_marginal(0b100, toy_x), [4, 1])
    assert np.array_equal(compute_marginal(0, toy_x), [5])
    assert np.array_equal(compute_marginal(0b111, toy_x), toy_x)


def test_marginal_from_sparse_coeffs(toy_x):
    f = fwht(toy_x)
    sparse = {b: f[b] for b in dominated_ints(0b110)}
    assert np.allclose(marginal_from_coeffs(0b110, sparse, d=3), [3, 1, 0, 1])
    del sparse[0b010]
    with pytest.raises(KeyError):
        marginal_from_coeffs(0b110, sparse, d=3)


def test_basis_marginal_entry():
    assert basis_marginal_entry(0b110, 0b100, 0b100, 3) == pytest.approx(-2 ** -0.5)
    assert basis_marginal_entry(0b110, 0b100, 0b000, 3) == pytest.approx(2 ** -0.5)
    assert basis_marginal_entry(0b110, 0b001, 0b000, 3) == 0.0
    with pytest.raises(ValueError):
        basis_marginal_entry(0b110, 0b000, 0b001, 3)


def test_basis_entry_matches_marginal_of_basis_vector():
    d = 4
    for a in (0b0000, 0b1010, 0b1111):
        for b in range(1 << d):
            e = np.zeros(1 << d)
            e[b] = 1.0
            basis = fwht(e)  # fwht is symmetric, so this is f^beta
            col = compute_marginal(a, basis)
            want = [basis_marginal_entry(a, b, g, d) for g in dominated_ints(a)]
            assert np.allclose(col, want, atol=1e-12)


def test_fourier_marginal_matrix_reconstructs(toy_x):
    masks = (0, 2, 4, 6)
    M = fourier_marginal_matrix([0b100, 0b110], masks, 3)
    assert np.allclose(M @ fwht(toy_x)[list(masks)], [4, 1, 3, 1, 0, 1])
