from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from domain.linalg.blockmat import BlockMatrix
from domain.linalg.operators import l_iden, l_zero, omega, psi
from domain.models import DncsSpec, FiniteSolution, SolveStatus, SteadySolution
from usecases.thresholds import assumption_warnings

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
DEFAULT_DIVERGENCE_CAP = 1e12

Mats = Tuple[np.ndarray, ...]


@dataclass(frozen=True)
class IterationOutcome:
    status: SolveStatus
    iterations: int
    mats: Mats
    residual: float


def value_iteration(
    update: Callable[[Mats], Mats],
    init: Mats,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    divergence_cap: float = DEFAULT_DIVERGENCE_CAP,
    label: str = "riccati",
) -> IterationOutcome:
    """ゼロから update を繰り返す。

    収束判定は max_k ‖P_k' − P_k‖_F / (1 + ‖P_k'‖_F) < tol、発散判定はいずれかのトレースが cap 超え。
    単調非減少列なので振動は起きない。
    """
    mats = tuple(init)
    change = float("inf")
    for it in range(1, max_iter + 1):
        new = update(mats)
        traces = [float(np.trace(M)) for M in new]
        if not all(np.isfinite(traces)) or max(traces, default=0.0) > divergence_cap:
            logger.info("%s: diverged after %d iterations (max trace %.3e)", label, it, max(traces))
            return IterationOutcome(SolveStatus.diverged, it, new, float("inf"))
        change = max(
            (np.linalg.norm(N - M) / (1.0 + np.linalg.norm(N)) for N, M in zip(new, mats)),
            default=0.0,
        )
        mats = new
        if it % 1000 == 0:
            logger.debug("%s: iteration %d change %.3e", label, it, change)
        if change < tol:
            logger.info("%s: converged after %d iterations", label, it)
            return IterationOutcome(SolveStatus.converged, it, mats, change)
    logger.info("%s: max_iter=%d reached (last change %.3e)", label, max_iter, change)
    return IterationOutcome(SolveStatus.max_iter, max_iter, mats, change)


def _diag_block(P: np.ndarray, spec: DncsSpec, n: int) -> np.ndarray:
    return BlockMatrix.square(P, spec.state_dims).block(n, n)


def _mix(spec: DncsSpec, P0: np.ndarray, Pn: np.ndarray, n: int) -> np.ndarray:
    """(1−p^n)[P^0]_{nn} + p^n P^n"""
    p = spec.p_n(n)
    return (1.0 - p) * _diag_block(P0, spec, n) + p * Pn


def _coupled_update(spec: DncsSpec) -> Callable[[Mats], Mats]:
    A, B, Q, R = spec.A_matrix, spec.B_matrix, spec.Q, spec.R
    N = spec.n_subsystems

    def update(mats: Mats) -> Mats:
        P0, Pn = mats[0], mats[1:]
        out = [omega(P0, Q, R, A, B)]
        for n in range(1, N + 1):
            mix = _mix(spec, P0, Pn[n - 1], n)
            out.append(omega(mix, spec.Q_nn(n), spec.R_nn(n), spec.A_nn(n), spec.B_nn(n)))
        return tuple(out)

    return update


def _zeros(spec: DncsSpec) -> Mats:
    d = spec.state_part.total
    return (np.zeros((d, d)),) + tuple(np.zeros((dn, dn)) for dn in spec.state_dims)


def finite_horizon_solve(spec: DncsSpec, T: int) -> FiniteSolution:
    """P_{T+1}=0 から後ろ向きに再帰し、各時刻のゲインと最適コスト J*_T を返す。"""
    if T < 0:
        raise ValueError(f"horizon must be >= 0, got {T}")
    A, B, Q, R = spec.A_matrix, spec.B_matrix, spec.Q, spec.R
    N = spec.n_subsystems
    zeros = _zeros(spec)
    P0_seq = [zeros[0]] * (T + 2)
    Pn_seq = [zeros[1:]] * (T + 2)
    K0_seq = [None] * (T + 1)
    Kn_seq = [None] * (T + 1)
    cost = 0.0
    for t in range(T, -1, -1):
        P0_next, Pn_next = P0_seq[t + 1], Pn_seq[t + 1]
        P0_seq[t] = omega(P0_next, Q, R, A, B)
        K0_seq[t] = psi(P0_next, R, A, B)
        Pn_t, Kn_t = [], []
        for n in range(1, N + 1):
            mix = _mix(spec, P0_next, Pn_next[n - 1], n)
            cost += float(np.trace(mix))
            Pn_t.append(omega(mix, spec.Q_nn(n), spec.R_nn(n), spec.A_nn(n), spec.B_nn(n)))
            Kn_t.append(psi(mix, spec.R_nn(n), spec.A_nn(n), spec.B_nn(n)))
        Pn_seq[t] = tuple(Pn_t)
        Kn_seq[t] = tuple(Kn_t)
    return FiniteSolution(
        spec=spec,
        horizon=T,
        P0_seq=tuple(P0_seq),
        Pn_seq=tuple(Pn_seq),
        K0_seq=tuple(K0_seq),
        Kn_seq=tuple(Kn_seq),
        cost=cost,
    )


def _steady_from_fixed_point(spec: DncsSpec, outcome: IterationOutcome) -> SteadySolution:
    P0, Pn = outcome.mats[0], tuple(outcome.mats[1:])
    mixes = [_mix(spec, P0, Pn[n - 1], n) for n in range(1, spec.n_subsystems + 1)]
    if outcome.status is SolveStatus.diverged:
        # 発散時はゲインをゼロで埋める
        K0 = np.zeros((spec.input_part.total, spec.state_part.total))
        Kn = tuple(np.zeros((m, d)) for m, d in zip(spec.local_input_dims, spec.state_dims))
    else:
        K0 = psi(P0, spec.R, spec.A_matrix, spec.B_matrix)
        Kn = tuple(
            psi(mixes[n - 1], spec.R_nn(n), spec.A_nn(n), spec.B_nn(n)) for n in range(1, spec.n_subsystems + 1)
        )
    return SteadySolution(
        spec=spec,
        status=outcome.status,
        iterations=outcome.iterations,
        P0=P0,
        Pn=Pn,
        K0=K0,
        Kn=Kn,
        # サブシステム次元が異なり得るので Λ* はブロック対角で持つ (トレースは和に等しい)
        Lambda=la.block_diag(*mixes),
        residual=outcome.residual,
    )


def steady_solve(
    spec: DncsSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    divergence_cap: float = DEFAULT_DIVERGENCE_CAP,
    *,
    rank_tol: float = 1e-8,
) -> SteadySolution:
    """結合リカッチ方程式の定常解を値反復で求める。非収束はエラーではなく status で返す。"""
    for message in assumption_warnings(spec, rank_tol):
        logger.warning(message)
    outcome = value_iteration(
        _coupled_update(spec),
        _zeros(spec),
        tol=tol,
        max_iter=max_iter,
        divergence_cap=divergence_cap,
        label=f"steady_solve(N={spec.n_subsystems})",
    )
    return _steady_from_fixed_point(spec, outcome)


def two_controller_solve(
    A,
    B10,
    B11,
    Q,
    R,
    p1: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    divergence_cap: float = DEFAULT_DIVERGENCE_CAP,
) -> SteadySolution:
    """1 プラント・2 制御器の結合固定点方程式

        P^0 = Ω(P^0, Q, R, A, [B^10, B^11])
        P^1 = Ω((1−p)P^0 + p P^1, Q, R^11, A, B^11)

    を生の行列のまま反復する。
    """
    spec = DncsSpec.two_controller(A, B10, B11, Q, R, p1)
    A, Q, R = spec.A_blocks[0], spec.Q, spec.R
    B = np.hstack([spec.B_remote[0], spec.B_local[0]])
    B11 = spec.B_local[0]
    m0 = spec.remote_input_dim
    R11 = R[m0:, m0:]

    def update(mats: Mats) -> Mats:
        P0, P1 = mats
        return (
            omega(P0, Q, R, A, B),
            omega((1.0 - p1) * P0 + p1 * P1, Q, R11, A, B11),
        )

    d = A.shape[0]
    outcome = value_iteration(
        update,
        (np.zeros((d, d)), np.zeros((d, d))),
        tol=tol,
        max_iter=max_iter,
        divergence_cap=divergence_cap,
        label="two_controller_solve",
    )
    return _steady_from_fixed_point(spec, outcome)


def lift_subsystem(spec: DncsSpec, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """サブシステム n の行列を全体次元に持ち上げる: (Q̄, R̄, Ā, B̄)。

    Q̄ = L_zero(Q, Q^nn, n, n), R̄ = L_iden(R, R^nn, n+1),
    Ā = L_zero(A, A^nn, n, n), B̄ = L_zero(B, B^nn, n, n+1)。
    """
    Q_bar = l_zero(spec.Q_matrix, spec.Q_nn(n), n, n)
    R_bar = l_iden(spec.R_matrix, spec.R_nn(n), n + 1)
    A_bar = l_zero(spec.A_matrix, spec.A_nn(n), n, n)
    B_bar = l_zero(spec.B_matrix, spec.B_nn(n), n, n + 1)
    return np.asarray(Q_bar), np.asarray(R_bar), np.asarray(A_bar), np.asarray(B_bar)


def bar_representation(spec: DncsSpec, T: int) -> Tuple[Mats, ...]:
    """全サブシステムを全体次元で表した再帰。戻り値 [t][n] (n=0..N, t=0..T+1)。"""
    if T < 0:
        raise ValueError(f"horizon must be >= 0, got {T}")
    A, B, Q, R = spec.A_matrix, spec.B_matrix, spec.Q, spec.R
    lifts = [lift_subsystem(spec, n) for n in range(1, spec.n_subsystems + 1)]
    d = spec.state_part.total
    seq: list = [None] * (T + 2)
    seq[T + 1] = tuple(np.zeros((d, d)) for _ in range(spec.n_subsystems + 1))
    for t in range(T, -1, -1):
        nxt = seq[t + 1]
        out = [omega(nxt[0], Q, R, A, B)]
        for n, (Q_bar, R_bar, A_bar, B_bar) in enumerate(lifts, start=1):
            p = spec.p_n(n)
            out.append(omega((1.0 - p) * nxt[0] + p * nxt[n], Q_bar, R_bar, A_bar, B_bar))
        seq[t] = tuple(out)
    return tuple(seq)


def embed_finite_solution(solution: FiniteSolution) -> Tuple[Mats, ...]:
    """(P_t^0, L_zero(P_t^0, P_t^n, n, n)) の列。bar_representation と同じ形。"""
    spec = solution.spec
    out = []
    for P0, Pn in zip(solution.P0_seq, solution.Pn_seq):
        P0_block = BlockMatrix.square(P0, spec.state_dims)
        out.append((P0,) + tuple(np.asarray(l_zero(P0_block, Pn[n - 1], n, n)) for n in range(1, len(Pn) + 1)))
    return tuple(out)


def max_deviation(left: Sequence[Mats], right: Sequence[Mats]) -> float:
    if len(left) != len(right):
        return float("inf")
    return max(
        (float(np.max(np.abs(a - b), initial=0.0)) for L, R_ in zip(left, right) for a, b in zip(L, R_)),
        default=0.0,
    )


def embed_steady_solution(solution: SteadySolution) -> Mats:
    """(P*^0, L_zero(P*^0, P*^n, n, n))。補助 MJLS の DCARE 解と同じ形。"""
    spec = solution.spec
    P0_block = BlockMatrix.square(solution.P0, spec.state_dims)
    return (solution.P0,) + tuple(
        np.asarray(l_zero(P0_block, P, n, n)) for n, P in enumerate(solution.Pn, start=1)
    )
