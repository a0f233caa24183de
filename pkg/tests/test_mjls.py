import numpy as np
import pytest

from domain.errors import DimensionError, ModelStructureError
from domain.models import MjlsModel, SolveStatus
from tests.conftest import random_spec, scalar_spec
from usecases import mjls, riccati


def _rel_dev(left, right):
    scale = max(float(np.max(np.abs(M))) for mats in right for M in mats)
    return riccati.max_deviation(left, right) / (1.0 + scale)


class TestAuxiliaryModels:
    def test_nc_theta_pattern(self, random_spec_factory):
        spec = random_spec_factory()
        model = mjls.build_auxiliary_nc(spec)
        assert model.modes == spec.n_subsystems + 1
        assert model.theta[0].tolist() == [1.0] + [0.0] * spec.n_subsystems
        for n in range(1, spec.n_subsystems + 1):
            assert model.theta[n, 0] == pytest.approx(1.0 - spec.p_n(n))
            assert model.theta[n, n] == pytest.approx(spec.p_n(n))

    def test_zero_drop_probability_makes_rows_absorb(self):
        model = mjls.build_auxiliary_nc(scalar_spec(p=0.0))
        assert model.theta.tolist() == [[1.0, 0.0], [1.0, 0.0]]

    def test_two_controller_matches_n_controller(self):
        spec = scalar_spec(b11=0.7, p=0.3)
        two = mjls.build_auxiliary_2c([[2.0]], [[1.0]], [[0.7]], [[1.0]], spec.R, 0.3)
        nc = mjls.build_auxiliary_nc(spec)
        left = mjls.mjls_finite_recursions(two, 10).P_seq
        right = mjls.mjls_finite_recursions(nc, 10).P_seq
        assert _rel_dev(left, right) < 1e-10

    def test_recursions_match_bar_representation(self, rng):
        for _ in range(20):
            spec = random_spec(rng)
            rec = mjls.mjls_finite_recursions(mjls.build_auxiliary_nc(spec), 10)
            bar = riccati.bar_representation(spec, 10)
            assert _rel_dev(rec.P_seq, bar) < 1e-10


class TestDcare:
    def test_converged_gains_stabilize(self, rng):
        for _ in range(10):
            spec = random_spec(rng, n_max=2)
            model = mjls.build_auxiliary_nc(spec)
            dcare = mjls.dcare_solve(model)
            assert dcare.converged
            verdict = mjls.ss_test(model, dcare.K)
            assert verdict.schur_stable
            closed = [model.A_mode[m] + model.B_mode[m] @ dcare.K[m] for m in range(model.modes)]
            shortcut = max(mjls.triangular_shortcut(model, closed))
            assert abs(shortcut - verdict.rho) < 1e-8 * (1.0 + verdict.rho)

    def test_matches_steady_solve(self):
        spec = scalar_spec(p=0.1)
        dcare = mjls.dcare_solve(mjls.build_auxiliary_nc(spec))
        steady = riccati.steady_solve(spec)
        assert _rel_dev([dcare.P], [riccati.embed_steady_solution(steady)]) < 1e-9

    def test_infeasible_diverges(self):
        dcare = mjls.dcare_solve(mjls.build_auxiliary_nc(scalar_spec(p=0.3)))
        assert dcare.status is SolveStatus.diverged
        assert mjls.stabilizing_verdict(mjls.build_auxiliary_nc(scalar_spec(p=0.3)), dcare) is None

    def test_size_guard_falls_back_to_shortcut(self):
        model = mjls.build_auxiliary_nc(scalar_spec(p=0.1))
        dcare = mjls.dcare_solve(model)
        full = mjls.ss_test(model, dcare.K)
        guarded = mjls.ss_test(model, dcare.K, max_state_dim=0)
        assert guarded.rho == pytest.approx(full.rho, rel=1e-8, abs=1e-12)
        assert guarded.schur_stable == full.schur_stable


class TestShortcutAndAssembly:
    def test_kron_assembly_shape(self):
        theta = np.array([[1.0, 0.0], [0.4, 0.6]])
        big = mjls.kron_assembly(theta, [np.eye(2), 2 * np.eye(2)])
        assert big.shape == (8, 8)

    def test_kron_assembly_two_modes_is_upper_triangular(self, rng):
        p = 0.3
        theta = np.array([[1.0, 0.0], [1.0 - p, p]])
        M0, M1 = rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
        K0, K1 = np.kron(M0, M0), np.kron(M1, M1)
        expected = np.block([[K0, (1.0 - p) * K0], [np.zeros((4, 4)), p * K1]])
        np.testing.assert_allclose(mjls.kron_assembly(theta, [M0, M1]), expected, atol=1e-14)

    def test_scalar_sensor_radius(self):
        # M0 = 0, M1 = 2: ρ = p·4
        model = mjls.build_auxiliary_nc(scalar_spec(p=0.1))
        radii = mjls.triangular_shortcut(model, [np.zeros((1, 1)), np.array([[2.0]])])
        assert radii == pytest.approx((0.0, 0.4))

    def test_shortcut_rejects_general_theta(self):
        model = mjls.from_coupled_recursions(
            np.array([[0.5, 0.5], [0.5, 0.5]]), [np.eye(1)] * 2, [np.eye(1)] * 2, [np.eye(1)] * 2, [np.eye(1)] * 2
        )
        with pytest.raises(ModelStructureError):
            mjls.triangular_shortcut(model, [np.eye(1), np.eye(1)])

    def test_gain_count_must_match_modes(self):
        model = mjls.build_auxiliary_nc(scalar_spec())
        with pytest.raises(DimensionError):
            mjls.ss_test(model, [np.zeros((2, 1))])


class TestCoupledRecursions:
    def test_normalised_model_reproduces_weighted_recursions(self, rng):
        W = rng.uniform(0.0, 1.5, size=(3, 3))
        d, m = 2, 1
        A = [rng.standard_normal((d, d)) for _ in range(3)]
        B = [rng.standard_normal((d, m)) for _ in range(3)]
        Q = [np.eye(d)] * 3
        R = [np.eye(m)] * 3
        model = mjls.from_coupled_recursions(W, Q, R, A, B)
        np.testing.assert_allclose(model.theta.sum(axis=1), 1.0)
        direct = mjls.weighted_recursions(W, Q, R, A, B, 8)
        normalised = mjls.mjls_finite_recursions(model, 8).P_seq
        assert _rel_dev(normalised, direct) < 1e-10

    def test_rejects_negative_weights(self):
        with pytest.raises(ModelStructureError):
            mjls.from_coupled_recursions(np.array([[-0.1]]), [np.eye(1)], [np.eye(1)], [np.eye(1)], [np.eye(1)])


class TestDetectability:
    def test_search_finds_detector_for_detectable_model(self):
        model = mjls.build_auxiliary_nc(scalar_spec(p=0.1))
        verdict = mjls.sd_test(model, mjls.search_detector_gains(model))
        assert verdict.schur_stable

    def test_nilpotent_modes_without_injection_are_stable(self):
        model = MjlsModel(
            A_mode=(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [1.0, 0.0]])),
            B_mode=(np.zeros((2, 1)),) * 2,
            Q_mode=(np.zeros((2, 2)),) * 2,
            R_mode=(np.eye(1),) * 2,
            theta=np.array([[1.0, 0.0], [0.6, 0.4]]),
        )
        verdict = mjls.sd_test(model, [np.zeros((2, 2))] * 2)
        assert verdict.schur_stable
        assert verdict.rho < 1e-6

    def test_zero_cost_model_is_not_detectable(self):
        model = mjls.build_auxiliary_nc(scalar_spec(q=0.0, b11=1.0, p=0.1))
        verdict = mjls.sd_test(model, mjls.search_detector_gains(model, restarts=2))
        assert not verdict.schur_stable
