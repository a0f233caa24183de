from .dncs import (
    DncsSpec,
    NoiseKind,
    SolverOptions,
    SimOptions,
    OutputPaths,
    Scenario,
)
from .solutions import (
    SolveStatus,
    FiniteSolution,
    SteadySolution,
    Solution,
    StageGains,
    gains_at,
    MjlsModel,
    MjlsRecursion,
    DcareSolution,
    StabilityVerdict,
    SimConfig,
    SimState,
    MomentPath,
)
from .reports import (
    to_jsonable,
    ThresholdReport,
    FeasibilityVerdict,
    AnalyzeReport,
    SolveReport,
    SimReport,
    StepIdentityResult,
    CostCheckResult,
    CheckResult,
    VerifyReport,
    FiniteReport,
)
from .jobs import Command, JobAccepted, JobStatus, ScenarioJob

__all__ = [
    "DncsSpec",
    "NoiseKind",
    "SolverOptions",
    "SimOptions",
    "OutputPaths",
    "Scenario",
    "SolveStatus",
    "FiniteSolution",
    "SteadySolution",
    "Solution",
    "StageGains",
    "gains_at",
    "MjlsModel",
    "MjlsRecursion",
    "DcareSolution",
    "StabilityVerdict",
    "SimConfig",
    "SimState",
    "MomentPath",
    "to_jsonable",
    "ThresholdReport",
    "FeasibilityVerdict",
    "AnalyzeReport",
    "SolveReport",
    "SimReport",
    "StepIdentityResult",
    "CostCheckResult",
    "CheckResult",
    "VerifyReport",
    "FiniteReport",
    "Command",
    "JobAccepted",
    "JobStatus",
    "ScenarioJob",
]
