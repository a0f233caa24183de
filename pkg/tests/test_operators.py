import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from domain.errors import DimensionError, IllPosedCostError
from domain.linalg.blockmat import BlockMatrix
from domain.linalg.operators import completion_residual, l_iden, l_zero, omega, phi, pi_mix, psi

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _problem(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 5)), int(rng.integers(1, 4))
    G = rng.standard_normal((n, n))
    P = G @ G.T
    H = rng.standard_normal((n, n))
    Q = H @ H.T
    S = rng.standard_normal((m, m))
    R = S @ S.T + 0.5 * np.eye(m)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    K = rng.standard_normal((m, n))
    return rng, P, Q, R, A, B, K


def _scale(*mats):
    return 1.0 + max(float(np.max(np.abs(M))) for M in mats)


@settings(max_examples=200, deadline=None)
@given(seed=seeds)
def test_phi_dominates_omega(seed):
    _, P, Q, R, A, B, K = _problem(seed)
    Phi, Om = phi(P, K, Q, R, A, B), omega(P, Q, R, A, B)
    assert np.min(np.linalg.eigvalsh(Phi - Om)) >= -1e-8 * _scale(Phi, Om)


@settings(max_examples=200, deadline=None)
@given(seed=seeds)
def test_omega_is_monotone(seed):
    rng, P, Q, R, A, B, _ = _problem(seed)
    G = rng.standard_normal(P.shape)
    P_big = P + G @ G.T
    low, high = omega(P, Q, R, A, B), omega(P_big, Q, R, A, B)
    assert np.min(np.linalg.eigvalsh(high - low)) >= -1e-8 * _scale(low, high)


@settings(max_examples=200, deadline=None)
@given(seed=seeds)
def test_completion_of_squares(seed):
    _, P, Q, R, A, B, K = _problem(seed)
    Phi, Om = phi(P, K, Q, R, A, B), omega(P, Q, R, A, B)
    residual = completion_residual(P, K, R, A, B)
    assert np.max(np.abs(Phi - Om - residual)) <= 1e-8 * _scale(Phi, Om)


@settings(max_examples=50, deadline=None)
@given(seed=seeds)
def test_psi_minimises_phi(seed):
    _, P, Q, R, A, B, _ = _problem(seed)
    Phi = phi(P, psi(P, R, A, B), Q, R, A, B)
    np.testing.assert_allclose(Phi, omega(P, Q, R, A, B), rtol=0, atol=1e-8 * _scale(Phi))


def test_scalar_omega():
    # a=2, b=1, q=r=1, P=1: 1 + 4 - 4/2 = 3
    assert omega([[1.0]], [[1.0]], [[1.0]], [[2.0]], [[1.0]])[0, 0] == pytest.approx(3.0)
    assert psi([[1.0]], [[1.0]], [[2.0]], [[1.0]])[0, 0] == pytest.approx(-1.0)


def test_zero_input_reduces_to_lyapunov_step():
    A = np.array([[2.0]])
    assert omega([[1.0]], [[1.0]], [[1.0]], A, [[0.0]])[0, 0] == pytest.approx(5.0)


def test_ill_posed_cost():
    with pytest.raises(IllPosedCostError):
        omega(np.zeros((1, 1)), np.eye(1), np.zeros((1, 1)), np.eye(1), np.eye(1))


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        omega(np.eye(2), np.eye(2), np.eye(1), np.eye(3), np.ones((3, 1)))


class TestBlockOperators:
    def test_l_zero_places_block(self):
        P = BlockMatrix.square(np.ones((3, 3)), [1, 2])
        out = np.asarray(l_zero(P, [[1.0, 2.0], [3.0, 4.0]], 2, 2))
        expected = np.zeros((3, 3))
        expected[1:, 1:] = [[1.0, 2.0], [3.0, 4.0]]
        np.testing.assert_array_equal(out, expected)

    def test_l_zero_off_diagonal(self):
        P = BlockMatrix(np.zeros((3, 3)), (1, 2), (2, 1))
        out = np.asarray(l_zero(P, [[7.0], [8.0]], 2, 2))
        expected = np.zeros((3, 3))
        expected[1:, 2:] = [[7.0], [8.0]]
        np.testing.assert_array_equal(out, expected)

    def test_l_zero_wrong_size(self):
        P = BlockMatrix.square(np.zeros((3, 3)), [1, 2])
        with pytest.raises(DimensionError):
            l_zero(P, np.eye(2), 1, 1)

    def test_l_iden(self):
        P = BlockMatrix.square(np.zeros((3, 3)), [2, 1])
        out = np.asarray(l_iden(P, [[5.0]], 2))
        np.testing.assert_array_equal(out, np.diag([1.0, 1.0, 5.0]))

    def test_pi_mix(self):
        mixed = pi_mix([np.eye(2), 3 * np.eye(2)], [0.25, 0.75])
        np.testing.assert_allclose(mixed, 2.5 * np.eye(2))

    def test_pi_mix_scalar_weights(self):
        assert pi_mix([[[2.0]], [[4.0]]], [0.7, 0.3])[0, 0] == pytest.approx(2.6)

    def test_pi_mix_rejects_bad_row(self):
        with pytest.raises(ValueError):
            pi_mix([np.eye(2), np.eye(2)], [0.5, 0.6])
