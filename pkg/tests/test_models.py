import json
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from domain.errors import DimensionError, ModelStructureError, ScenarioError
from domain.models import DncsSpec, MjlsModel, SimConfig, SolveStatus, to_jsonable
from infrastructure.scenario.loader import load_scenario, parse_scenario
from tests.conftest import scalar_spec
from usecases.riccati import finite_horizon_solve


class TestDncsSpec:
    def test_scalar_two_controller(self):
        spec = scalar_spec()
        assert spec.n_subsystems == 1
        assert spec.input_part.total == 2
        np.testing.assert_array_equal(np.asarray(spec.B_matrix), [[1.0, 0.0]])
        assert spec.R_nn(1).tolist() == [[1.0]]

    def test_block_structure(self, random_spec_factory):
        spec = random_spec_factory()
        A, B = np.asarray(spec.A_matrix), np.asarray(spec.B_matrix)
        for n in range(1, spec.n_subsystems + 1):
            rows = spec.state_part.slice(n)
            np.testing.assert_array_equal(A[rows, rows], spec.A_nn(n))
            np.testing.assert_array_equal(B[rows, spec.input_part.slice(1)], spec.B_remote[n - 1])
            np.testing.assert_array_equal(B[rows, spec.input_part.slice(n + 1)], spec.B_nn(n))

    def test_matrices_are_read_only(self):
        with pytest.raises(ValueError):
            scalar_spec().Q[0, 0] = 3.0

    def test_with_drop_probs(self):
        spec = scalar_spec(p=0.1).with_drop_probs([0.3])
        assert spec.drop_probs == [0.3]

    def test_rejects_non_pd_R(self):
        with pytest.raises(ValidationError) as info:
            DncsSpec.two_controller([[2.0]], [[1.0]], [[0.0]], [[1.0]], [[1.0, 0.0], [0.0, 0.0]], 0.1)
        assert info.value.errors()[0]["loc"] == ("R",)

    def test_rejects_probability_outside_unit_interval(self):
        with pytest.raises(ValidationError):
            scalar_spec(p=1.5)


class TestScenarioLoader:
    def test_minimal_scalar(self, tmp_path, scenario_dict):
        path = tmp_path / "scalar.json"
        path.write_text(json.dumps(scenario_dict()), encoding="utf-8")
        scenario = load_scenario(path)
        assert scenario.spec.n_subsystems == 1
        assert scenario.solver.tol is None

    def test_non_pd_R_names_field(self, scenario_dict):
        data = scenario_dict()
        data["spec"]["R"] = [[1.0, 0.0], [0.0, -1.0]]
        with pytest.raises(ScenarioError) as info:
            parse_scenario(json.dumps(data), source="bad.json")
        assert info.value.location == "bad.json: spec -> R"
        assert info.value.exit_code == 2

    def test_mismatched_local_input_names_subsystem(self, scenario_dict):
        data = scenario_dict()
        data["spec"]["B_local"] = [[[0.0], [0.0]]]
        with pytest.raises(ScenarioError) as info:
            parse_scenario(json.dumps(data))
        assert "subsystem 1" in str(info.value)
        assert "B_local" in info.value.location

    def test_parse_error_has_line_and_column(self):
        with pytest.raises(ScenarioError) as info:
            parse_scenario('{\n  "name": "x",\n  "spec": }', source="broken.json")
        assert "line 3 column" in info.value.location

    def test_rejects_infinity_in_inputs(self, scenario_dict):
        text = json.dumps(scenario_dict()).replace("2.0", "Infinity")
        with pytest.raises(ScenarioError):
            parse_scenario(text)

    def test_rejects_unknown_keys(self, scenario_dict):
        with pytest.raises(ScenarioError):
            parse_scenario(json.dumps(scenario_dict(plots={})))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError):
            load_scenario(tmp_path / "missing.json")


class TestToJsonable:
    def test_special_values(self):
        data = to_jsonable(
            {"a": np.eye(2), "inf": float("inf"), "ninf": -np.inf, "nan": np.nan, "z": 1 + 2j, "s": SolveStatus.diverged}
        )
        assert data == {
            "a": [[1.0, 0.0], [0.0, 1.0]],
            "inf": "inf",
            "ninf": "-inf",
            "nan": "nan",
            "z": [1.0, 2.0],
            "s": "diverged",
        }
        json.dumps(data, allow_nan=False)

    def test_numpy_scalars(self):
        assert to_jsonable([np.int64(3), np.float64(0.5), np.bool_(True)]) == [3, 0.5, True]


class TestMjlsModel:
    def test_rejects_non_stochastic_theta(self):
        with pytest.raises(ModelStructureError):
            MjlsModel(
                A_mode=(np.eye(1), np.eye(1)),
                B_mode=(np.eye(1), np.eye(1)),
                Q_mode=(np.eye(1), np.eye(1)),
                R_mode=(np.eye(1), np.eye(1)),
                theta=[[1.0, 0.0], [0.5, 0.4]],
            )

    def test_rejects_mode_shape_mismatch(self):
        with pytest.raises(DimensionError):
            MjlsModel(
                A_mode=(np.eye(1), np.eye(2)),
                B_mode=(np.eye(1), np.eye(1)),
                Q_mode=(np.eye(1), np.eye(1)),
                R_mode=(np.eye(1), np.eye(1)),
                theta=np.eye(2),
            )


def test_sim_config_horizon_must_match_finite_solution():
    with pytest.raises(DimensionError):
        SimConfig(solution=finite_horizon_solve(scalar_spec(), 3), horizon=4, num_runs=1, seed=0)


@pytest.mark.parametrize("path", sorted((Path(__file__).parent.parent / "scenarios").glob("*.json")), ids=lambda p: p.stem)
def test_shipped_scenarios_load(path):
    scenario = load_scenario(path)
    assert scenario.name
