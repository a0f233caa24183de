import numpy as np
import pytest

from tests.conftest import scalar_spec
from usecases import thresholds


@pytest.mark.parametrize("a", [1.5, 2.0, 3.0])
def test_sensor_threshold_is_inverse_square(a):
    report = thresholds.critical_probs(scalar_spec(a=a, p=0.0))
    assert abs(report.p_c[0] - a**-2) < 1e-12
    assert report.p_s == report.p_c
    assert report.detectable_local == [True]


def test_reachable_local_has_no_threshold():
    report = thresholds.critical_probs(scalar_spec(b11=1.0, p=0.9))
    assert report.p_c == [float("inf")]
    assert report.p_c_effective == [1.0]
    assert report.uncontrollable_modes == [[]]
    assert thresholds.feasibility_verdict(scalar_spec(b11=1.0, p=1.0)).feasible


def test_boundary_probability_is_infeasible():
    verdict = thresholds.feasibility_verdict(scalar_spec(p=0.25))
    assert not verdict.feasible
    assert verdict.binding == [1]
    assert thresholds.feasibility_verdict(scalar_spec(p=0.2499)).feasible


def test_stable_uncontrollable_mode_allows_any_drop_rate():
    report = thresholds.critical_probs(scalar_spec(a=0.5, p=0.0))
    assert report.p_c == [4.0]
    assert report.p_c_effective == [1.0]
    assert thresholds.feasibility_verdict(scalar_spec(a=0.5, p=1.0)).feasible


def test_zero_eigenvalue_gives_infinite_threshold():
    report = thresholds.critical_probs(scalar_spec(a=0.0, p=0.5))
    assert report.p_c == [float("inf")]


def test_undetectable_local_pair_uses_detectability_threshold():
    report = thresholds.critical_probs(scalar_spec(b11=1.0, q=0.0, p=0.1))
    assert report.p_s == [float("inf")]
    assert report.p_d == [pytest.approx(0.25)]
    assert report.p_c == [pytest.approx(0.25)]
    assert report.detectable_local == [False]
    assert not report.detectable_full


class TestModes:
    def test_repeated_eigenvalue_partial_input(self):
        modes = thresholds.uncontrollable_modes(2.0 * np.eye(2), np.array([[1.0], [0.0]]))
        assert modes == [2.0]

    def test_repeated_eigenvalue_no_input(self):
        assert thresholds.uncontrollable_modes(2.0 * np.eye(2), np.zeros((2, 1))) == [2.0, 2.0]

    def test_jordan_block_is_controllable_from_last_state(self):
        A = np.array([[2.0, 1.0], [0.0, 2.0]])
        assert thresholds.uncontrollable_modes(A, np.array([[0.0], [1.0]])) == []

    def test_complex_pair(self):
        c, s = np.cos(0.7), np.sin(0.7)
        A = 1.5 * np.array([[c, -s], [s, c]])
        modes = thresholds.uncontrollable_modes(A, np.zeros((2, 1)))
        assert len(modes) == 2
        assert all(abs(z) == pytest.approx(1.5) for z in modes)
        assert thresholds.min_achievable_radius(A, np.zeros((2, 1))) == pytest.approx(1.5)

    def test_undetectable_is_dual(self):
        A = np.diag([2.0, 0.5])
        C = np.array([[1.0, 0.0]])
        assert thresholds.undetectable_modes(A, C) == [0.5]


def test_assumption_warnings():
    messages = thresholds.assumption_warnings(scalar_spec(b10=0.0, b11=0.0))
    assert "(A, B) is not stabilizable" in messages
    assert thresholds.assumption_warnings(scalar_spec()) == []


def test_threshold_report_is_json_ready():
    data = thresholds.critical_probs(scalar_spec()).jsonable()
    assert data["p_c"] == [0.25]
    assert data["uncontrollable_modes"] == [[[2.0, 0.0]]]
