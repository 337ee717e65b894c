import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import naive_conv1d
from spxnet import numerics as nx


def test_matmul_examples():
    np.testing.assert_array_equal(nx.matmul([[1, 2], [3, 4]], [[5], [6]]), [[17], [39]])
    b = np.arange(6.0).reshape(3, 2)
    np.testing.assert_array_equal(nx.matmul(np.eye(3), b), b)
    np.testing.assert_array_equal(nx.matmul(np.zeros((2, 3)), b), np.zeros((2, 2)))
    with pytest.raises(nx.ShapeMismatch):
        nx.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_transpose_identity():
    rng = np.random.default_rng(0)
    for _ in range(50):
        m, k, n = rng.integers(1, 8, size=3)
        a, b = rng.normal(size=(m, k)), rng.normal(size=(k, n))
        np.testing.assert_allclose(nx.matmul(a, b).T, nx.matmul(b.T, a.T), atol=1e-12)
        np.testing.assert_allclose(nx.matmul(nx.matmul(np.eye(m), a), b), nx.matmul(a, b), atol=1e-12)


def test_conv1d_examples():
    x = np.array([1.0, 2, 3, 4, 5])[:, None]
    pick = np.array([1.0, 0, 0]).reshape(3, 1, 1)
    np.testing.assert_array_equal(nx.conv1d_valid(x, pick, np.zeros(1))[:, 0], [1, 2, 3])
    ones = np.ones((3, 1, 1))
    np.testing.assert_array_equal(nx.conv1d_valid(x, ones, np.zeros(1))[:, 0], [6, 9, 12])
    out = nx.conv1d_valid(np.random.default_rng(1).normal(size=(9, 2)), np.zeros((3, 2, 4)),
                          np.array([0.5, -1, 2, 3]))
    assert np.all(out == np.array([0.5, -1, 2, 3]))


def test_conv1d_errors():
    with pytest.raises(nx.KernelTooLong):
        nx.conv1d_valid(np.ones((2, 1)), np.ones((3, 1, 1)), np.zeros(1))
    with pytest.raises(nx.ShapeMismatch):
        nx.conv1d_valid(np.ones((5, 2)), np.ones((3, 1, 1)), np.zeros(1))


def test_conv1d_matches_naive_oracle():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        L, C, F = rng.integers(1, 21), rng.integers(1, 4), rng.integers(1, 6)
        K = rng.integers(1, L + 1)
        x, w, b = rng.normal(size=(L, C)), rng.normal(size=(K, C, F)), rng.normal(size=F)
        worst = max(worst, np.abs(nx.conv1d_valid(x, w, b) - naive_conv1d(x, w, b)).max())
    assert worst <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(1, 3), st.integers(1, 5), st.integers(1, 4))
def test_conv1d_shape(L, K, C, F, B):
    if K > L:
        return
    out = nx.conv1d_valid(np.ones((B, L, C)), np.ones((K, C, F)), np.zeros(F))
    assert out.shape == (B, L - K + 1, F)
    same = nx.conv1d(np.ones((L, C)), np.ones((K, C, F)), np.zeros(F), padding="same")
    assert same.shape == (L, F)


def test_same_padding_centres_odd_kernels():
    x = np.arange(1.0, 6.0)[:, None]
    out = nx.conv1d(x, np.ones((3, 1, 1)), np.zeros(1), padding="same")[:, 0]
    np.testing.assert_array_equal(out, [3, 6, 9, 12, 9])


def test_relu_and_grad():
    np.testing.assert_array_equal(nx.relu(np.array([-1.0, 0, 2])), [0, 0, 2])
    np.testing.assert_array_equal(nx.relu_grad(np.array([-1.0, 0, 2])), [0, 0, 1])
    x = np.random.default_rng(3).normal(size=100)
    np.testing.assert_array_equal(nx.relu(nx.relu(x)), nx.relu(x))


def test_elementwise():
    assert nx.sigmoid(np.array(0.0)) == 0.5
    assert nx.tanh(0.0) == 0.0
    assert nx.mean([1, 2, 3, 6]) == 3.0
    assert nx.total([1, 2, 3, 6]) == 12.0
    a, b = np.array([1.0, 2]), np.array([3.0, 5])
    np.testing.assert_array_equal(nx.add(a, b), [4, 7])
    np.testing.assert_array_equal(nx.sub(a, b), [-2, -3])
    np.testing.assert_array_equal(nx.hadamard(a, b), [3, 10])
    np.testing.assert_array_equal(nx.scale(a, 2), [2, 4])
    with pytest.raises(nx.ShapeMismatch):
        nx.add(a, np.ones(3))


def test_sigmoid_is_stable_at_extremes():
    out = nx.sigmoid(np.array([-800.0, 800.0]))
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [0.0, 1.0])


def test_as_tensor_rank_bounds():
    assert nx.as_tensor([1, 2]).dtype == np.float64
    with pytest.raises(nx.ShapeMismatch):
        nx.as_tensor(np.ones((1, 1, 1, 1)))
    with pytest.raises(FloatingPointError):
        nx.check_finite(np.array([1.0, np.nan]))
