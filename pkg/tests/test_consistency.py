import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpcube.consistency import (build_fourier_system, consistent_marginals, independent_rows,
                                ls_consistent, rank_consistent)
from dpcube.core import Workload, workload_matrix
from dpcube.transform import fwht


def test_exact_answers_are_fixed_points(toy_workload, toy_x):
    system = build_fourier_system(toy_workload)
    assert system.K == 6 and system.m == 4
    exact = workload_matrix(toy_workload) @ toy_x
    coeffs, ybar = ls_consistent(system, exact)
    assert np.allclose(ybar, exact)
    assert np.allclose(coeffs, fwht(toy_x)[list(system.masks)])


def test_sum_rule_after_projection(toy_workload):
    system = build_fourier_system(toy_workload)
    noisy = np.array([4.3, 0.2, 2.9, 1.7, -0.4, 1.1])
    a, ab = consistent_marginals(system, noisy)
    assert a[0] == pytest.approx(ab[0] + ab[1], abs=1e-9)
    assert a[1] == pytest.approx(ab[2] + ab[3], abs=1e-9)
    with pytest.raises(ValueError):
        ls_consistent(system, noisy[:5])


def test_error_at_most_doubles_on_fig1(toy_workload, toy_x):
    system = build_fourier_system(toy_workload)
    truth = workload_matrix(toy_workload) @ toy_x
    rng = np.random.default_rng(5)
    for _ in range(200):
        y = truth + rng.laplace(scale=3.0, size=6)
        ybar = ls_consistent(system, y)[1]
        assert np.linalg.norm(ybar - truth) <= 2 * np.linalg.norm(y - truth) + 1e-12


def test_rank_consistent_matches_fourier_path(toy_workload):
    Q = workload_matrix(toy_workload)
    y0 = np.random.default_rng(2).normal(size=6)
    assert np.allclose(rank_consistent(Q, y0), ls_consistent(build_fourier_system(toy_workload), y0)[1])
    assert independent_rows(Q).size == 4
    assert np.array_equal(rank_consistent(np.eye(3), y0[:3]), y0[:3])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_projection_idempotent_and_nonexpansive(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 6))
    masks = tuple(sorted(set(int(m) for m in rng.integers(0, 1 << d, size=3))))
    w = Workload(d=d, marginals=masks)
    system = build_fourier_system(w)
    x = rng.integers(0, 20, size=1 << d).astype(float)
    truth = workload_matrix(w) @ x
    y = truth + rng.normal(scale=2.0, size=truth.size)
    ybar = ls_consistent(system, y)[1]
    assert np.allclose(ls_consistent(system, ybar)[1], ybar, atol=1e-8)
    assert np.linalg.norm(ybar - truth) <= np.linalg.norm(y - truth) + 1e-9
    assert np.allclose(rank_consistent(workload_matrix(w), y), ybar, atol=1e-8)


def test_bad_inputs():
    with pytest.raises(ValueError):
        build_fourier_system(Workload.dense(np.eye(4)))
    with pytest.raises(ValueError):
        build_fourier_system([1, 2])
