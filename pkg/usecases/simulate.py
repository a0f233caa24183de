from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from domain.errors import DimensionError, SimulationDiverged
from domain.linalg.blockmat import BlockMatrix, spectral_radius
from domain.linalg.operators import l_zero
from domain.models import (
    CostCheckResult,
    DncsSpec,
    FiniteSolution,
    MomentPath,
    NoiseKind,
    SimConfig,
    SimReport,
    SimState,
    Solution,
    SteadySolution,
    StepIdentityResult,
    gains_at,
)
from infrastructure.rng.philox_noise import PhiloxNoiseSource, ZeroNoiseSource
from infrastructure.trace.csv_writer import trace_header
from usecases.ports import NoiseSourcePort, TraceSinkPort
from usecases.riccati import finite_horizon_solve

logger = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e9
IDENTITY_TOL = 1e-8


def _local_gain(spec: DncsSpec, Kn: Sequence[np.ndarray]) -> np.ndarray:
    """K^n をブロック (n+1, n) に置いた行列。リモート入力の行はゼロ。"""
    Kloc = np.zeros((spec.input_part.total, spec.state_part.total))
    for n, K in enumerate(Kn, start=1):
        Kloc[spec.input_part.slice(n + 1), spec.state_part.slice(n)] = K
    return Kloc


def _closed_loop_local(spec: DncsSpec, Kn: Sequence[np.ndarray], n: int) -> np.ndarray:
    """A_s(n) = A^nn + B^nn K^n"""
    return spec.A_nn(n) + spec.B_nn(n) @ Kn[n - 1]


def step(state: SimState, link_outcomes, noise, solution: Solution) -> SimState:
    """閉ループを 1 ステップ進める。先頭軸が試行のバッチでもよい。

    link_outcomes は時刻 t+1 の送信が届いたか (Γ^n_{t+1})。
    """
    spec = solution.spec
    N = spec.n_subsystems
    gains = gains_at(solution, state.t)
    gamma = np.asarray(link_outcomes).astype(bool)
    if gamma.shape[-1:] != (N,):
        raise DimensionError(f"expected {N} link outcomes, got shape {gamma.shape}")
    A, B = np.asarray(spec.A_matrix), np.asarray(spec.B_matrix)
    Kloc = _local_gain(spec, gains.Kn)

    x, x_hat = state.x, state.x_hat
    # リモート入力は x̂ だけに依存する
    u = x_hat @ gains.K0.T + (x - x_hat) @ Kloc.T
    cost = np.einsum("...i,ij,...j->...", x, spec.Q, x) + np.einsum("...i,ij,...j->...", u, spec.R, u)
    x_next = x @ A.T + u @ B.T + np.asarray(noise, dtype=float)
    if not np.all(np.isfinite(x_next)):
        raise SimulationDiverged("non-finite state", step=state.t)

    predicted = x_hat @ (A + B @ gains.K0).T
    received = np.repeat(gamma, spec.state_dims, axis=-1)
    x_hat_next = np.where(received, x_next, predicted)

    sigma_next = []
    for n in range(1, N + 1):
        A_sn = _closed_loop_local(spec, gains.Kn, n)
        spread = np.eye(spec.state_dims[n - 1]) + A_sn @ state.sigma[n - 1] @ A_sn.T
        sigma_next.append(np.where(gamma[..., n - 1, None, None], 0.0, spread))

    return SimState(
        x=x_next,
        x_hat=x_hat_next,
        sigma=tuple(sigma_next),
        t=state.t + 1,
        accumulated_cost=state.accumulated_cost + cost,
        u=u,
        gamma=gamma,
        stage_cost=cost,
    )


@dataclass
class _ChunkResult:
    runs: np.ndarray
    totals: np.ndarray
    aborted: np.ndarray
    sq_state_sum: np.ndarray
    sq_error_sum: np.ndarray
    alive_count: np.ndarray
    trace: Optional[np.ndarray]


@dataclass
class RunStatistics:
    totals: np.ndarray
    aborted: np.ndarray
    mean_sq_state: np.ndarray
    mean_sq_error: np.ndarray
    steps: int

    @property
    def completed(self) -> np.ndarray:
        return self.totals[~self.aborted]


def _stage_count(config: SimConfig) -> int:
    # 有限時間は t=0..T、定常は t=0..H-1
    return config.horizon + 1 if isinstance(config.solution, FiniteSolution) else config.horizon


def _simulate_chunk(config: SimConfig, source: NoiseSourcePort, runs: np.ndarray) -> _ChunkResult:
    spec = config.spec
    N, d = spec.n_subsystems, spec.state_part.total
    steps = _stage_count(config)
    draws = [source.draw(int(r), steps, d, N, config.noise) for r in runs]
    noise = np.stack([w for w, _ in draws], axis=1)
    links = np.stack([u for _, u in draws], axis=1) >= np.asarray(spec.drop_probs)

    state = SimState.initial(spec, runs=len(runs))
    alive = np.ones(len(runs), dtype=bool)
    prev_gamma = np.ones((len(runs), N), dtype=bool)
    sq_state, sq_error, count = np.zeros(steps), np.zeros(steps), np.zeros(steps)
    rows: List[np.ndarray] = []
    for t in range(steps):
        nxt = step(state, links[t], noise[t], config.solution)
        sq_state[t] = np.sum(np.sum(state.x**2, axis=-1)[alive])
        sq_error[t] = np.sum(np.sum((state.x - state.x_hat) ** 2, axis=-1)[alive])
        count[t] = np.sum(alive)
        if config.record_every and t % config.record_every == 0:
            rows.append(
                np.column_stack(
                    [np.full(len(runs), t), runs, state.x, state.x_hat, prev_gamma, nxt.u, nxt.stage_cost]
                )
            )
        blown = alive & (np.max(np.abs(nxt.x), axis=-1) > BLOWUP_LIMIT)
        if np.any(blown):
            for r in runs[blown]:
                logger.warning("run %d aborted at t=%d: |x| exceeded %.0e", r, t, BLOWUP_LIMIT)
            alive &= ~blown
            nxt.x[~alive] = 0.0
            nxt.x_hat[~alive] = 0.0
            for sigma in nxt.sigma:
                sigma[~alive] = 0.0
        prev_gamma = links[t]
        state = nxt

    totals = np.where(alive, state.accumulated_cost, np.nan)
    trace = None
    if rows:
        # 試行番号, 時刻の順に並べる
        trace = np.concatenate(rows, axis=0)
        trace = trace[np.lexsort((trace[:, 0], trace[:, 1]))]
    return _ChunkResult(runs, totals, ~alive, sq_state, sq_error, count, trace)


def _noise_source(config: SimConfig, noise_source: Optional[NoiseSourcePort]) -> NoiseSourcePort:
    if noise_source is not None:
        return noise_source
    return ZeroNoiseSource(config.seed) if config.zero_noise else PhiloxNoiseSource(config.seed)


def simulate_runs(
    config: SimConfig,
    *,
    noise_source: Optional[NoiseSourcePort] = None,
    trace_sink: Optional[TraceSinkPort] = None,
) -> RunStatistics:
    """全試行を chunk_runs 件ずつ実行し、試行番号順に集計する。"""
    source = _noise_source(config, noise_source)
    spec = config.spec
    all_runs = np.arange(config.num_runs)
    chunks = [all_runs[i : i + config.chunk_runs] for i in range(0, config.num_runs, config.chunk_runs)]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(lambda rs: _simulate_chunk(config, source, rs), chunks))
    else:
        results = [_simulate_chunk(config, source, rs) for rs in chunks]

    if trace_sink is not None and config.record_every:
        trace_sink.open(trace_header(spec.state_part.total, spec.n_subsystems, spec.input_part.total))
        try:
            for res in results:
                if res.trace is not None:
                    trace_sink.write_rows(res.trace)
        finally:
            trace_sink.close()

    count = np.sum([r.alive_count for r in results], axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_sq_state = np.sum([r.sq_state_sum for r in results], axis=0) / count
        mean_sq_error = np.sum([r.sq_error_sum for r in results], axis=0) / count
    return RunStatistics(
        totals=np.concatenate([r.totals for r in results]),
        aborted=np.concatenate([r.aborted for r in results]),
        mean_sq_state=mean_sq_state,
        mean_sq_error=mean_sq_error,
        steps=_stage_count(config),
    )


def _mean_and_stderr(values: np.ndarray) -> Tuple[float, float]:
    if len(values) == 0:
        return float("inf"), float("inf")
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0
    return mean, stderr


def _finite_max(series: np.ndarray) -> float:
    finite = series[np.isfinite(series)]
    return float(np.max(finite)) if finite.size else float("nan")


def run_monte_carlo(
    config: SimConfig,
    *,
    noise_source: Optional[NoiseSourcePort] = None,
    trace_sink: Optional[TraceSinkPort] = None,
) -> SimReport:
    """独立な試行を num_runs 回まわし、時間平均コストの平均と標準誤差を返す。"""
    solution = config.solution
    if isinstance(solution, SteadySolution):
        solution.require_converged()
        if config.horizon < 1:
            raise ValueError("steady-state simulation needs horizon >= 1")
        predicted = solution.avg_cost
    else:
        predicted = solution.cost / (solution.horizon + 1)

    stats = simulate_runs(config, noise_source=noise_source, trace_sink=trace_sink)
    mean, stderr = _mean_and_stderr(stats.completed / stats.steps)
    aborted = [int(r) for r in np.flatnonzero(stats.aborted)]
    if aborted:
        logger.warning("%d of %d runs aborted by the blow-up guard", len(aborted), config.num_runs)
    logger.info("monte carlo: mean avg cost %.6f +/- %.6f (predicted %.6f)", mean, stderr, predicted)
    source = _noise_source(config, noise_source)
    series = config.record_every > 0
    return SimReport(
        mean_avg_cost=mean,
        stderr=stderr,
        predicted=predicted,
        max_mean_sq_state=_finite_max(stats.mean_sq_state),
        max_mean_sq_error=_finite_max(stats.mean_sq_error),
        num_runs=config.num_runs,
        completed_runs=config.num_runs - len(aborted),
        horizon=config.horizon,
        seed=config.seed,
        generator=source.generator_name,
        noise="zero" if config.zero_noise else config.noise.value,
        aborted_runs=aborted,
        mean_sq_state=stats.mean_sq_state.tolist() if series else None,
        mean_sq_error=stats.mean_sq_error.tolist() if series else None,
    )


def _value_function(solution: SteadySolution, x_hat: np.ndarray, sigma_set: Sequence[np.ndarray]) -> float:
    """V = x̂ᵀP*^0x̂ + Σ_n tr(P*^n Σ^n)"""
    return float(x_hat @ solution.P0 @ x_hat) + sum(float(np.trace(P @ S)) for P, S in zip(solution.Pn, sigma_set))


def verify_step_identity(
    x_hat, sigma_set: Sequence, solution: SteadySolution, tol: float = IDENTITY_TOL
) -> StepIdentityResult:
    """E[c | H] + E[V_{t+1} | H] = tr(Λ*) + V_t を閉形式で両辺評価する。"""
    solution.require_converged()
    spec = solution.spec
    x_hat = np.asarray(x_hat, dtype=float).ravel()
    sigma_set = [np.atleast_2d(np.asarray(S, dtype=float)) for S in sigma_set]
    if x_hat.shape != (spec.state_part.total,) or len(sigma_set) != spec.n_subsystems:
        raise DimensionError("x_hat or sigma_set does not match the spec")
    A, B = np.asarray(spec.A_matrix), np.asarray(spec.B_matrix)
    K0, Kn = solution.K0, solution.Kn
    A_s0 = A + B @ K0
    P0_blocks = BlockMatrix.square(solution.P0, spec.state_dims)

    expected_cost = float(x_hat @ (spec.Q + K0.T @ spec.R @ K0) @ x_hat)
    expected_value = float(x_hat @ A_s0.T @ solution.P0 @ A_s0 @ x_hat)
    for n in range(1, spec.n_subsystems + 1):
        Sigma = sigma_set[n - 1]
        K, p = Kn[n - 1], spec.p_n(n)
        expected_cost += float(np.trace((spec.Q_nn(n) + K.T @ spec.R_nn(n) @ K) @ Sigma))
        A_sn = _closed_loop_local(spec, Kn, n)
        spread = np.eye(spec.state_dims[n - 1]) + A_sn @ Sigma @ A_sn.T
        expected_value += (1.0 - p) * float(np.trace(P0_blocks.block(n, n) @ spread))
        expected_value += p * float(np.trace(solution.Pn[n - 1] @ spread))

    lhs = expected_cost + expected_value
    rhs = float(np.trace(solution.Lambda)) + _value_function(solution, x_hat, sigma_set)
    residual = abs(lhs - rhs)
    return StepIdentityResult(lhs=lhs, rhs=rhs, residual=residual, passed=residual < tol * (1.0 + abs(rhs)))


def propagate_moments(solution: Solution, steps: Optional[int] = None) -> MomentPath:
    """最適戦略下の E[x̂x̂ᵀ] = S_t と E[Σ^n_t] = Ē^n_t を厳密に伝搬する。

    steps 個のステージ t=0..steps-1 の値を返し、S_final は時刻 steps の S。
    有限時間解の既定は T+1 ステージ。
    """
    spec = solution.spec
    if steps is None:
        if not isinstance(solution, FiniteSolution):
            raise ValueError("steps is required for a steady solution")
        steps = solution.horizon + 1
    if isinstance(solution, SteadySolution):
        solution.require_converged()
    d = spec.state_part.total
    A, B, Q, R = np.asarray(spec.A_matrix), np.asarray(spec.B_matrix), spec.Q, spec.R
    zero_block = BlockMatrix.square(np.zeros((d, d)), spec.state_dims)
    S = np.zeros((d, d))
    E = [np.zeros((dn, dn)) for dn in spec.state_dims]
    mean_sq_state, mean_sq_error, stage_cost = np.zeros(steps), np.zeros(steps), np.zeros(steps)
    for t in range(steps):
        gains = gains_at(solution, t)
        err = sum(float(np.trace(En)) for En in E)
        mean_sq_state[t] = float(np.trace(S)) + err
        mean_sq_error[t] = err
        stage_cost[t] = float(np.trace((Q + gains.K0.T @ R @ gains.K0) @ S)) + sum(
            float(np.trace((spec.Q_nn(n) + K.T @ spec.R_nn(n) @ K) @ E[n - 1]))
            for n, K in enumerate(gains.Kn, start=1)
        )
        A_s0 = A + B @ gains.K0
        S_next = A_s0 @ S @ A_s0.T
        E_next = []
        for n in range(1, spec.n_subsystems + 1):
            A_sn = _closed_loop_local(spec, gains.Kn, n)
            spread = np.eye(spec.state_dims[n - 1]) + A_sn @ E[n - 1] @ A_sn.T
            p = spec.p_n(n)
            S_next = S_next + (1.0 - p) * np.asarray(l_zero(zero_block, spread, n, n))
            E_next.append(p * spread)
        S, E = S_next, E_next
    return MomentPath(
        mean_sq_state=mean_sq_state,
        mean_sq_error=mean_sq_error,
        stage_cost=stage_cost,
        S_final=S,
        E_final=tuple(E),
    )


def steady_strategy_cost(solution: SteadySolution, T: int) -> float:
    """定常戦略の有限時間コスト J_T = (T+1)tr(Λ*) − E[V_{T+1}]。"""
    path = propagate_moments(solution, T + 1)
    terminal = float(np.trace(solution.P0 @ path.S_final)) + sum(
        float(np.trace(P @ E)) for P, E in zip(solution.Pn, path.E_final)
    )
    return (T + 1) * float(np.trace(solution.Lambda)) - terminal


def mean_square_stable(solution: SteadySolution) -> bool:
    """ρ(A+BK*^0) < 1 かつ全 n で p^n ρ(A^nn+B^nnK*^n)² < 1。"""
    solution.require_converged()
    spec = solution.spec
    A, B = np.asarray(spec.A_matrix), np.asarray(spec.B_matrix)
    if spectral_radius(A + B @ solution.K0) >= 1.0:
        return False
    return all(
        spec.p_n(n) * spectral_radius(_closed_loop_local(spec, solution.Kn, n)) ** 2 < 1.0
        for n in range(1, spec.n_subsystems + 1)
    )


def finite_horizon_cost_check(
    spec: DncsSpec,
    T: int,
    num_runs: int,
    seed: int,
    *,
    noise: NoiseKind = NoiseKind.normal,
    workers: int = 1,
    chunk_runs: int = 50,
    noise_source: Optional[NoiseSourcePort] = None,
    trace_sink: Optional[TraceSinkPort] = None,
    record_every: int = 0,
) -> CostCheckResult:
    """時変最適戦略をモンテカルロで評価し、J*_T と比べる。厳密な期待コストも併記する。"""
    solution = finite_horizon_solve(spec, T)
    config = SimConfig(
        solution=solution,
        horizon=T,
        num_runs=num_runs,
        seed=seed,
        noise=noise,
        workers=workers,
        chunk_runs=chunk_runs,
        record_every=record_every,
    )
    stats = simulate_runs(config, noise_source=noise_source, trace_sink=trace_sink)
    mc_cost, stderr = _mean_and_stderr(stats.completed)
    dp_cost = solution.cost
    if stderr > 0:
        z_score = abs(mc_cost - dp_cost) / stderr
    else:
        z_score = 0.0 if abs(mc_cost - dp_cost) <= 1e-12 * (1.0 + abs(dp_cost)) else float("inf")
    return CostCheckResult(
        mc_cost=mc_cost,
        dp_cost=dp_cost,
        exact_cost=propagate_moments(solution).total_cost,
        stderr=stderr,
        z_score=z_score,
        num_runs=num_runs,
        horizon=T,
    )
