import numpy as np
import pytest
import scipy.linalg as la

from domain.models import SolveStatus
from tests.conftest import random_spec, scalar_spec
from usecases import riccati, thresholds

P0_SCALAR = 2.0 + np.sqrt(5.0)  # a=2, b=q=r=1 の DARE


def _scalar_lambda(p):
    P1 = (1.0 + 4.0 * (1.0 - p) * P0_SCALAR) / (1.0 - 4.0 * p)
    return (1.0 - p) * P0_SCALAR + p * P1, P1


class TestFiniteHorizon:
    def test_one_step_cost_is_one(self):
        solution = riccati.finite_horizon_solve(scalar_spec(p=0.1), 1)
        assert solution.cost == pytest.approx(1.0, abs=1e-12)
        assert solution.P0_seq[1][0, 0] == pytest.approx(1.0)
        assert solution.Pn_seq[1][0][0, 0] == pytest.approx(1.0)

    def test_zero_horizon(self):
        solution = riccati.finite_horizon_solve(scalar_spec(), 0)
        assert solution.cost == 0.0
        assert solution.K0_seq[0].shape == (2, 1)
        np.testing.assert_array_equal(solution.K0_seq[0], 0.0)

    def test_sequences_have_expected_lengths(self):
        solution = riccati.finite_horizon_solve(scalar_spec(), 5)
        assert len(solution.P0_seq) == 7
        assert len(solution.K0_seq) == 6
        np.testing.assert_array_equal(solution.P0_seq[6], 0.0)

    def test_negative_horizon(self):
        with pytest.raises(ValueError):
            riccati.finite_horizon_solve(scalar_spec(), -1)


class TestSteadySolve:
    def test_scalar_sensor_closed_form(self):
        solution = riccati.steady_solve(scalar_spec(p=0.1))
        expected, P1 = _scalar_lambda(0.1)
        assert solution.status is SolveStatus.converged
        assert solution.P0[0, 0] == pytest.approx(P0_SCALAR, rel=1e-8)
        assert solution.Pn[0][0, 0] == pytest.approx(P1, rel=1e-8)
        assert solution.avg_cost == pytest.approx(expected, rel=1e-8)
        # B^11 = 0 なのでローカルゲインはゼロ
        assert solution.Kn[0].tolist() == [[0.0]]

    def test_perfect_links_match_centralized_are(self, random_spec_factory):
        spec = random_spec_factory()
        spec = spec.with_drop_probs([0.0] * spec.n_subsystems)
        solution = riccati.steady_solve(spec)
        A, B = np.asarray(spec.A_matrix), np.asarray(spec.B_matrix)
        P = la.solve_discrete_are(A, B, spec.Q, spec.R)
        np.testing.assert_allclose(solution.P0, P, rtol=1e-7, atol=1e-7)
        assert solution.avg_cost == pytest.approx(np.trace(solution.P0), rel=1e-10)

    def test_infeasible_diverges(self):
        solution = riccati.steady_solve(scalar_spec(p=0.3))
        assert solution.status is SolveStatus.diverged
        assert solution.avg_cost == float("inf")
        np.testing.assert_array_equal(solution.K0, 0.0)

    def test_max_iter_is_distinct_status(self):
        solution = riccati.steady_solve(scalar_spec(p=0.1), max_iter=3)
        assert solution.status is SolveStatus.max_iter
        assert solution.iterations == 3
        assert not solution.converged

    def test_lambda_is_block_diagonal_of_mixes(self, random_spec_factory):
        spec = random_spec_factory()
        solution = riccati.steady_solve(spec)
        assert solution.converged
        for n in range(1, spec.n_subsystems + 1):
            rows = spec.state_part.slice(n)
            p = spec.p_n(n)
            mix = (1 - p) * solution.P0[rows, rows] + p * solution.Pn[n - 1]
            np.testing.assert_allclose(solution.Lambda[rows, rows], mix)

    def test_warns_on_undetectable_local_pair(self, caplog):
        spec = scalar_spec(q=0.0, b11=1.0)
        riccati.steady_solve(spec, max_iter=5)
        assert any("not detectable" in r.message for r in caplog.records)


def test_threshold_and_convergence_agree(rng):
    for _ in range(30):
        spec = random_spec(rng, sensor=True)
        report = thresholds.critical_probs(spec)
        p_c = report.p_c
        assert all(np.isfinite(p) and p < 1.0 for p in p_c)

        inside = riccati.steady_solve(spec.with_drop_probs([0.9 * p for p in p_c]))
        assert inside.status is SolveStatus.converged

        outside = riccati.steady_solve(spec.with_drop_probs([min(1.0, 1.1 * p) for p in p_c]))
        assert outside.status is SolveStatus.diverged


def test_two_controller_matches_general_solver():
    spec = scalar_spec(b11=0.5, p=0.4)
    two = riccati.two_controller_solve([[2.0]], [[1.0]], [[0.5]], [[1.0]], spec.R, 0.4)
    general = riccati.steady_solve(spec)
    assert two.iterations == general.iterations
    np.testing.assert_allclose(two.P0, general.P0, rtol=1e-12)
    np.testing.assert_allclose(two.Pn[0], general.Pn[0], rtol=1e-12)


def test_representation_matches_embedding(rng):
    for _ in range(50):
        spec = random_spec(rng)
        bar = riccati.bar_representation(spec, 10)
        embedded = riccati.embed_finite_solution(riccati.finite_horizon_solve(spec, 10))
        scale = max(float(np.max(np.abs(M))) for mats in bar for M in mats)
        assert riccati.max_deviation(bar, embedded) < 1e-9 * (1.0 + scale)


def test_lift_subsystem_shapes():
    spec = random_spec(np.random.default_rng(3), n_max=3)
    d, m = spec.state_part.total, spec.input_part.total
    for n in range(1, spec.n_subsystems + 1):
        Q_bar, R_bar, A_bar, B_bar = riccati.lift_subsystem(spec, n)
        assert Q_bar.shape == A_bar.shape == (d, d)
        assert R_bar.shape == (m, m)
        assert B_bar.shape == (d, m)
        rows = spec.state_part.slice(n)
        np.testing.assert_array_equal(A_bar[rows, rows], spec.A_nn(n))
