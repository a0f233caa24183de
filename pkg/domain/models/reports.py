from __future__ import annotations

import math
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field


def to_jsonable(value: Any) -> Any:
    """レポート用に変換する。ndarray は入れ子リスト、複素数は [re, im]、±inf/NaN は文字列。"""
    if isinstance(value, BaseModel):
        return to_jsonable(value.dict())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(float(value.real)), to_jsonable(float(value.imag))]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


class ReportModel(BaseModel):
    class Config:
        extra = "forbid"
        arbitrary_types_allowed = True

    def jsonable(self) -> Dict[str, Any]:
        return to_jsonable(self)


class ThresholdReport(ReportModel):
    """サブシステムごとの臨界ドロップ確率と仮定チェック。"""

    p_c: List[float]
    p_s: List[float]
    p_d: List[float]
    p_c_effective: List[float]
    uncontrollable_modes: List[List[complex]]
    undetectable_modes: List[List[complex]]
    detectable_full: bool
    stabilizable_full: bool
    detectable_local: List[bool]


class FeasibilityVerdict(ReportModel):
    feasible: bool
    binding: List[int] = Field(default_factory=list)


class AnalyzeReport(ReportModel):
    scenario: str
    drop_probs: List[float]
    thresholds: ThresholdReport
    verdict: FeasibilityVerdict
    warnings: List[str] = Field(default_factory=list)


class SolveReport(ReportModel):
    scenario: str
    status: str
    iterations: int
    residual: float
    P0: np.ndarray
    Pn: List[np.ndarray]
    K0: np.ndarray
    Kn: List[np.ndarray]
    Lambda: np.ndarray
    avg_cost: float
    mean_square_stable: Optional[bool] = None
    warnings: List[str] = Field(default_factory=list)


class SimReport(ReportModel):
    mean_avg_cost: float
    stderr: float
    predicted: float
    max_mean_sq_state: float
    max_mean_sq_error: float
    num_runs: int
    completed_runs: int
    horizon: int
    seed: int
    generator: str
    noise: str
    aborted_runs: List[int] = Field(default_factory=list)
    mean_sq_state: Optional[List[float]] = None
    mean_sq_error: Optional[List[float]] = None


class StepIdentityResult(ReportModel):
    lhs: float
    rhs: float
    residual: float
    passed: bool


class CostCheckResult(ReportModel):
    mc_cost: float
    dp_cost: float
    exact_cost: float
    stderr: float
    z_score: float
    num_runs: int
    horizon: int


class CheckResult(ReportModel):
    name: str
    passed: bool
    residual: Optional[float] = None
    detail: str = ""


class VerifyReport(ReportModel):
    scenario: str
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def jsonable(self) -> Dict[str, Any]:
        data = to_jsonable(self)
        data["passed"] = self.passed
        return data


class FiniteReport(ReportModel):
    scenario: str
    horizon: int
    cost_check: CostCheckResult
    K0_initial: np.ndarray
    Kn_initial: List[np.ndarray]
