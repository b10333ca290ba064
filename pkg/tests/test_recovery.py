import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpcube.core import Workload, workload_matrix
from dpcube.mechanism import release
from dpcube.recovery import (NotReconstructible, answer, gls_recovery, natural_recovery,
                             predicted_variance)
from dpcube.strategy import build_strategy

from oracle import naive_gls

# averages the direct answer with the one implied by the other marginal
HALF_HALF = np.array([[.5, 0, .5, .5, 0, 0], [0, .5, 0, 0, .5, .5],
                      [.5, 0, .5, -.5, 0, 0], [.5, 0, -.5, .5, 0, 0],
                      [0, .5, 0, 0, .5, -.5], [0, .5, 0, 0, -.5, .5]])


def toy_sigma(eta_a, eta_ab):
    return np.array([2 / eta_a ** 2] * 2 + [2 / eta_ab ** 2] * 4)


def test_identity_and_orthonormal_cases():
    Q = np.random.default_rng(0).normal(size=(3, 4))
    assert np.allclose(gls_recovery(Q, np.eye(4), np.ones(4)).R, Q)
    H = np.array([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]]) / 2.0
    assert np.allclose(gls_recovery(Q, H, np.full(4, 3.0)).R, Q @ H.T)


def test_toy_half_half_and_gls(toy_workload):
    Q = workload_matrix(toy_workload)
    sigma = toy_sigma(4 / 9, 5 / 9)
    assert np.allclose(HALF_HALF @ Q, Q)
    assert predicted_variance(HALF_HALF, sigma)[1] == pytest.approx(34.6275, abs=1e-9)
    gls = gls_recovery(Q, Q, sigma)
    assert np.allclose(gls.R @ Q, Q)
    # the minimum-variance recovery can only do better than any hand-built one
    assert predicted_variance(gls, sigma)[1] <= 34.6275
    assert np.allclose(gls.R, naive_gls(Q, Q, sigma), atol=1e-8)


def test_gls_rank_deficient_and_unreachable():
    rng = np.random.default_rng(1)
    B = rng.normal(size=(3, 8))
    S = np.vstack([B, B[0] + B[1], 2 * B[2]])
    Q = rng.normal(size=(2, 3)) @ B
    sigma = rng.uniform(0.5, 2, size=5)
    R = gls_recovery(Q, S, sigma).R
    assert np.abs(Q - R @ S).max() < 1e-8
    assert np.allclose(R, naive_gls(Q, S, sigma), atol=1e-8)
    with pytest.raises(NotReconstructible):
        gls_recovery(np.eye(8)[:1], S, sigma)


def test_gls_drops_infinite_variance_rows():
    S = np.vstack([np.eye(4), np.eye(4)])
    sigma = np.array([1.0] * 4 + [np.inf] * 4)
    R = gls_recovery(np.eye(4), S, sigma).R
    assert np.allclose(R[:, :4], np.eye(4)) and np.all(R[:, 4:] == 0)
    with pytest.raises(NotReconstructible):
        gls_recovery(np.eye(4), S, np.array([1.0, 1, 1, np.inf, 1, 1, 1, np.inf]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gls_unbiased_and_no_worse_than_alternatives(seed):
    rng = np.random.default_rng(seed)
    n = 1 << int(rng.integers(2, 5))
    S = rng.normal(size=(n + 3, n))
    Q = rng.normal(size=(4, n))
    sigma = rng.uniform(0.2, 5, size=n + 3)
    R = gls_recovery(Q, S, sigma).R
    assert np.abs(Q - R @ S).max() < 1e-8
    # any other unbiased recovery Q S^+ + Z (I - S S^+) has at least the GLS variance
    other = Q @ np.linalg.pinv(S)
    other = other + rng.normal(size=other.shape) @ (np.eye(n + 3) - S @ np.linalg.pinv(S))
    assert predicted_variance(R, sigma)[1] <= predicted_variance(other, sigma)[1] * (1 + 1e-9)


def test_natural_recoveries(toy_workload, toy_x):
    Q = workload_matrix(toy_workload)
    for kind, source in (("identity", "aggregate"), ("workload", "direct"), ("fourier", "fourier")):
        S, _ = build_strategy(kind, toy_workload)
        R = natural_recovery(toy_workload, S)
        assert R.source == source
        assert np.allclose(R.R @ S.dense(), Q)
    S, _ = build_strategy("marginals", toy_workload, centroids=[0b111, 0b110])
    R = natural_recovery(toy_workload, S)
    assert np.allclose(R.R @ S.dense(), Q)
    S, _ = build_strategy("hierarchical", toy_workload)
    R = natural_recovery(toy_workload, S)
    assert R.source == "aggregate" and np.allclose(R.R @ S.dense(), Q)
    D = np.eye(8)[:3]
    S, _ = build_strategy("dense", Workload.dense(np.eye(8)), matrix=D)
    with pytest.raises(ValueError):
        natural_recovery(Workload.dense(np.eye(8)), S)


def test_answer_and_suppressed_rows(toy_workload, toy_x, pure):
    S, _ = build_strategy("workload", toy_workload)
    R = natural_recovery(toy_workload, S)
    z = release(S, toy_x, np.full(6, 0.5), pure, seed=0, noiseless=True)
    b = answer(R, z)
    assert np.allclose(b.y, [4, 1, 3, 1, 0, 1]) and b.total_variance == pytest.approx(48.0)
    z = release(S, toy_x, [0.5, 0.5, 0, 0, 0, 0], pure, seed=0)
    with pytest.raises(ValueError):
        answer(R, z)
    with pytest.raises(ValueError):
        predicted_variance(R, [1.0, 1.0, np.inf, 1.0, 1.0, 1.0])
