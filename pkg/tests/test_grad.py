import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyargmax.core import CutMaxParams
from polyargmax.errors import InvalidParams, SingularityError
from polyargmax.grad import DualArray, cutmax_jacobian, cutmax_jvp, finite_difference_jvp


def params_for(n, T=3):
    return CutMaxParams(3, 2.0 * np.sqrt(n - 1), T)


def test_zero_and_uniform_directions_give_zero():
    x = np.random.default_rng(0).normal(size=10)
    P = params_for(10)
    np.testing.assert_array_equal(cutmax_jvp(x, np.zeros(10), P), np.zeros(10))
    np.testing.assert_allclose(cutmax_jvp(x, np.ones(10), P), 0.0, atol=1e-14)


def test_matches_finite_differences_on_random_pairs():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 65))
        x, v = rng.normal(size=n), rng.normal(size=n)
        P = params_for(n)
        jvp, fd = cutmax_jvp(x, v, P), finite_difference_jvp(x, v, P, h=1e-5)
        worst = max(worst, np.linalg.norm(jvp - fd) / max(np.linalg.norm(fd), 1e-12))
    assert worst <= 1e-4


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_jvp_is_linear_in_direction(seed, a, b):
    rng = np.random.default_rng(seed)
    x, v, w = rng.normal(size=(3, 12))
    P = params_for(12)
    np.testing.assert_allclose(cutmax_jvp(x, a * v + b * w, P),
                               a * cutmax_jvp(x, v, P) + b * cutmax_jvp(x, w, P), atol=1e-10)


def test_jacobian_rows_and_columns_sum_to_zero():
    x = np.random.default_rng(2).normal(size=16)
    J = cutmax_jacobian(x, params_for(16))
    assert np.abs(J.sum(axis=0)).max() <= 1e-6   # outputs sum to one
    assert np.abs(J.sum(axis=1)).max() <= 1e-6   # uniform shifts do nothing
    np.testing.assert_allclose(J @ np.eye(16)[3], cutmax_jvp(x, np.eye(16)[3], params_for(16)), atol=1e-15)


def test_two_entry_jacobian_is_antisymmetric_under_swap():
    J = cutmax_jacobian(np.array([1.0, -1.0]), CutMaxParams(3, 2.0, 2))
    P = np.array([[0, 1], [1, 0]])
    np.testing.assert_allclose(P @ J @ P, J, atol=1e-15)
    np.testing.assert_allclose(J, -J.T, atol=1e-15)


def test_jacobian_shrinks_as_iterations_grow():
    x = np.random.default_rng(3).normal(size=8)
    norms = [np.abs(cutmax_jacobian(x, CutMaxParams(7, 4.0, T))).sum(axis=1).max() for T in (2, 4, 6, 8)]
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_singularity_and_shape_errors():
    with pytest.raises(SingularityError):
        cutmax_jvp(np.ones(4), np.arange(4.0), CutMaxParams(3, 5.0, 1))
    with pytest.raises(InvalidParams):
        cutmax_jvp(np.arange(4.0), np.ones(3), CutMaxParams(3, 5.0, 1))


def test_dual_arithmetic_rules():
    a = DualArray(np.array([2.0]), np.array([[1.0]]))
    np.testing.assert_allclose((a * a).dot, [[4.0]])
    np.testing.assert_allclose((1.0 / a).dot, [[-0.25]])
    np.testing.assert_allclose(a.rsqrt().dot, [[-0.5 * 2.0 ** -1.5]])
    np.testing.assert_allclose((a ** 3).dot, [[12.0]])
    np.testing.assert_allclose((3.0 - a).val, [1.0])
