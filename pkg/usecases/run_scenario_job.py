from __future__ import annotations

import datetime
import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, Optional

from pydantic import ValidationError

from domain.errors import DncsError, InfeasibleError, ScenarioError
from domain.models import (
    AnalyzeReport,
    Command,
    FiniteReport,
    JobStatus,
    Scenario,
    ScenarioJob,
    SimConfig,
    SimOptions,
    SolveReport,
    SolverOptions,
    SolveStatus,
)
from infrastructure.trace.csv_writer import CsvTraceWriter
from usecases import riccati, simulate, thresholds, verify
from usecases.ports import JobStorePort, ReportRendererPort

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INFEASIBLE = 3
EXIT_NUMERIC = 4


@dataclass(frozen=True)
class RunOptions:
    """解決済みの実行パラメータ。優先順位は CLI > シナリオ > Settings。

    finite_horizon は finite の T。horizon が明示されたときはそれに揃える。
    """

    tol: float = riccati.DEFAULT_TOL
    max_iter: int = riccati.DEFAULT_MAX_ITER
    divergence_cap: float = riccati.DEFAULT_DIVERGENCE_CAP
    rank_tol: float = thresholds.RANK_TOL
    numeric_tol: float = verify.REPRESENTATION_TOL
    runs: int = 200
    horizon: int = 5000
    finite_horizon: int = 50
    seed: int = 0
    workers: int = 1
    chunk_runs: int = 50
    trace_path: Optional[str] = None

    def solver_kwargs(self) -> Dict[str, Any]:
        return dict(tol=self.tol, max_iter=self.max_iter, divergence_cap=self.divergence_cap)


@dataclass(frozen=True)
class CommandOutcome:
    report: Dict[str, Any]
    exit_code: int


def _checked_overrides(overrides: Dict[str, Any]) -> Dict[str, Any]:
    """CLI などの上書き値をシナリオと同じ制約 (seed >= 0 など) で検証する。"""
    given = {k: v for k, v in overrides.items() if v is not None}
    try:
        SolverOptions(**{k: v for k, v in given.items() if k in SolverOptions.__fields__})
        SimOptions(**{k: v for k, v in given.items() if k in ("runs", "horizon", "seed")})
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ScenarioError(first["msg"], location=f"override {first['loc'][0]}") from exc
    return given


def resolve_options(scenario: Scenario, defaults: RunOptions, overrides: Optional[Dict[str, Any]] = None) -> RunOptions:
    """Settings 由来の defaults にシナリオの solver{}/sim{} と CLI の上書きを重ねる。None は未指定。"""
    layered: Dict[str, Any] = {}
    from_scenario = {
        "tol": scenario.solver.tol,
        "max_iter": scenario.solver.max_iter,
        "divergence_cap": scenario.solver.divergence_cap,
        "rank_tol": scenario.solver.rank_tol,
        "runs": scenario.sim.runs,
        "horizon": scenario.sim.horizon,
        "seed": scenario.sim.seed,
        "trace_path": scenario.outputs.trace,
    }
    for layer in (from_scenario, _checked_overrides(overrides or {})):
        layered.update({k: v for k, v in layer.items() if v is not None})
    if "horizon" in layered:
        layered["finite_horizon"] = layered["horizon"]
    return replace(defaults, **layered)


def _solve_report(scenario: Scenario, solution, warnings) -> SolveReport:
    return SolveReport(
        scenario=scenario.name,
        status=solution.status.value,
        iterations=solution.iterations,
        residual=solution.residual,
        P0=solution.P0,
        Pn=list(solution.Pn),
        K0=solution.K0,
        Kn=list(solution.Kn),
        Lambda=solution.Lambda,
        avg_cost=solution.avg_cost,
        mean_square_stable=simulate.mean_square_stable(solution) if solution.converged else None,
        warnings=warnings,
    )


def cmd_analyze(scenario: Scenario, options: RunOptions) -> CommandOutcome:
    spec = scenario.spec
    report = thresholds.critical_probs(spec, options.rank_tol)
    verdict = thresholds.feasibility_verdict(spec, options.rank_tol, report)
    warnings = thresholds.assumption_warnings(spec, options.rank_tol, report)
    for message in warnings:
        logger.warning(message)
    analysis = AnalyzeReport(
        scenario=scenario.name,
        drop_probs=list(spec.drop_probs),
        thresholds=report,
        verdict=verdict,
        warnings=warnings,
    )
    logger.info("analyze %s: feasible=%s p_c=%s", scenario.name, verdict.feasible, report.p_c)
    return CommandOutcome(analysis.jsonable(), EXIT_OK if verdict.feasible else EXIT_INFEASIBLE)


def cmd_solve(scenario: Scenario, options: RunOptions) -> CommandOutcome:
    solution = riccati.steady_solve(scenario.spec, rank_tol=options.rank_tol, **options.solver_kwargs())
    warnings = thresholds.assumption_warnings(scenario.spec, options.rank_tol)
    logger.info(
        "solve %s: %s after %d iterations (avg cost %s)",
        scenario.name,
        solution.status.value,
        solution.iterations,
        solution.avg_cost,
    )
    exit_code = EXIT_OK if solution.status is SolveStatus.converged else EXIT_INFEASIBLE
    return CommandOutcome(_solve_report(scenario, solution, warnings).jsonable(), exit_code)


def cmd_simulate(scenario: Scenario, options: RunOptions) -> CommandOutcome:
    solution = riccati.steady_solve(scenario.spec, rank_tol=options.rank_tol, **options.solver_kwargs())
    if not solution.converged:
        raise InfeasibleError(
            f"scenario {scenario.name!r} has no converged steady solution ({solution.status.value}); refusing to simulate"
        )
    config = SimConfig(
        solution=solution,
        horizon=options.horizon,
        num_runs=options.runs,
        seed=options.seed,
        noise=scenario.sim.noise,
        record_every=scenario.sim.record_every,
        zero_noise=scenario.sim.zero_noise,
        workers=options.workers,
        chunk_runs=options.chunk_runs,
    )
    sink = None
    if options.trace_path and config.record_every:
        sink = CsvTraceWriter(options.trace_path)
    elif options.trace_path:
        logger.info("record_every is 0; no trace written to %s", options.trace_path)
    sim = simulate.run_monte_carlo(config, trace_sink=sink)
    return CommandOutcome({"scenario": scenario.name, **sim.jsonable()}, EXIT_OK)


def cmd_verify(scenario: Scenario, options: RunOptions) -> CommandOutcome:
    result = verify.run_verification(
        scenario.spec,
        name=scenario.name,
        seed=options.seed,
        rank_tol=options.rank_tol,
        representation_tol=options.numeric_tol,
        **options.solver_kwargs(),
    )
    return CommandOutcome(result.jsonable(), EXIT_OK if result.passed else EXIT_NUMERIC)


def cmd_finite(scenario: Scenario, options: RunOptions) -> CommandOutcome:
    spec = scenario.spec
    T = options.finite_horizon
    check = simulate.finite_horizon_cost_check(
        spec,
        T,
        options.runs,
        options.seed,
        noise=scenario.sim.noise,
        workers=options.workers,
        chunk_runs=options.chunk_runs,
        trace_sink=CsvTraceWriter(options.trace_path) if options.trace_path else None,
        record_every=scenario.sim.record_every,
    )
    solution = riccati.finite_horizon_solve(spec, T)
    report = FiniteReport(
        scenario=scenario.name,
        horizon=T,
        cost_check=check,
        K0_initial=solution.K0_seq[0],
        Kn_initial=list(solution.Kn_seq[0]),
    )
    logger.info("finite %s: J*_T=%.6g mc=%.6g z=%.3f", scenario.name, check.dp_cost, check.mc_cost, check.z_score)
    return CommandOutcome(report.jsonable(), EXIT_OK)


COMMANDS: Dict[Command, Callable[[Scenario, RunOptions], CommandOutcome]] = {
    Command.analyze: cmd_analyze,
    Command.solve: cmd_solve,
    Command.simulate: cmd_simulate,
    Command.verify: cmd_verify,
    Command.finite: cmd_finite,
}


def execute_command(command: Command, scenario: Scenario, options: RunOptions) -> CommandOutcome:
    return COMMANDS[Command(command)](scenario, options)


def _now_iso() -> str:
    return datetime.datetime.utcnow().isoformat() + "Z"


def _append_log(job: ScenarioJob, message: str) -> None:
    job.logs.append(message)


def run_scenario_job(
    job_id: str,
    command: Command,
    scenario: Scenario,
    options: RunOptions,
    job_store: JobStorePort,
    summary_renderer: Optional[ReportRendererPort] = None,
) -> ScenarioJob:
    """コマンドを 1 件のジョブとして実行し、状態とログをストアに反映する。"""
    job = job_store.get(job_id) or ScenarioJob(job_id=job_id, command=command, scenario_name=scenario.name)
    job.status = JobStatus.running
    job.started_at = _now_iso()
    _append_log(job, f"{job.command.value} started for scenario {scenario.name!r}")
    job_store.update(job)

    try:
        outcome = execute_command(job.command, scenario, options)
        job.report = outcome.report
        job.exit_code = outcome.exit_code
        if summary_renderer is not None:
            job.summary = summary_renderer.render(job.command.value, outcome.report)
        _append_log(job, f"{job.command.value} finished with exit code {outcome.exit_code}")
        job.status = JobStatus.done
    except DncsError as exc:
        _append_log(job, f"Job failed: {exc}")
        job.exit_code = exc.exit_code
        job.status = JobStatus.failed
    except Exception as exc:
        logger.exception("job %s crashed", job_id)
        _append_log(job, f"Job failed: {exc}")
        job.exit_code = EXIT_NUMERIC
        job.status = JobStatus.failed
    job.finished_at = _now_iso()
    job_store.update(job)
    return job
