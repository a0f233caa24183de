from __future__ import annotations

import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize

from domain.errors import DimensionError, ModelStructureError
from domain.linalg.blockmat import kron, psd_sqrt, spectral_radius
from domain.linalg.operators import omega, pi_mix, psi
from domain.models import DcareSolution, DncsSpec, MjlsModel, MjlsRecursion, SolveStatus, StabilityVerdict
from usecases.riccati import (
    DEFAULT_DIVERGENCE_CAP,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    lift_subsystem,
    value_iteration,
)

logger = logging.getLogger(__name__)

MAX_KRON_STATE_DIM = 12
MAX_KRON_JUMP_MODES = 8
# この半径まで下がれば探索を打ち切る
SEARCH_RHO_FLOOR = 1e-12

Mats = Tuple[np.ndarray, ...]


def build_auxiliary_2c(A, B10, B11, Q, R, p1: float) -> MjlsModel:
    """2 制御器モデルの補助 MJLS (モード 0 は吸収、モード 1 は確率 p1 で自己遷移)。"""
    spec = DncsSpec.two_controller(A, B10, B11, Q, R, p1)
    A, Q, R = spec.A_blocks[0], spec.Q, spec.R
    B10, B11 = spec.B_remote[0], spec.B_local[0]
    m0 = spec.remote_input_dim
    B = np.hstack([B10, B11])
    B_drop = np.hstack([np.zeros_like(B10), B11])
    R_drop = la.block_diag(np.eye(m0), R[m0:, m0:])
    theta = np.array([[1.0, 0.0], [1.0 - p1, p1]])
    return MjlsModel(A_mode=(A, A), B_mode=(B, B_drop), Q_mode=(Q, Q), R_mode=(R, R_drop), theta=theta)


def build_auxiliary_nc(spec: DncsSpec) -> MjlsModel:
    """N 制御器モデルの補助 MJLS。モード n は subsystem n を全体次元に持ち上げた行列。"""
    N = spec.n_subsystems
    A_mode, B_mode = [np.asarray(spec.A_matrix)], [np.asarray(spec.B_matrix)]
    Q_mode, R_mode = [np.asarray(spec.Q)], [np.asarray(spec.R)]
    theta = np.zeros((N + 1, N + 1))
    theta[0, 0] = 1.0
    for n in range(1, N + 1):
        Q_bar, R_bar, A_bar, B_bar = lift_subsystem(spec, n)
        A_mode.append(A_bar)
        B_mode.append(B_bar)
        Q_mode.append(Q_bar)
        R_mode.append(R_bar)
        p = spec.p_n(n)
        theta[n, 0] += 1.0 - p
        theta[n, n] += p
    return MjlsModel(
        A_mode=tuple(A_mode), B_mode=tuple(B_mode), Q_mode=tuple(Q_mode), R_mode=tuple(R_mode), theta=theta
    )


def _mode_update(model: MjlsModel, mix: Callable[[Mats, int], np.ndarray]) -> Callable[[Mats], Mats]:
    def update(P: Mats) -> Mats:
        return tuple(
            omega(mix(P, m), model.Q_mode[m], model.R_mode[m], model.A_mode[m], model.B_mode[m])
            for m in range(model.modes)
        )

    return update


def _stochastic_mix(model: MjlsModel) -> Callable[[Mats, int], np.ndarray]:
    return lambda P, m: pi_mix(P, model.theta[m])


def _zeros(model: MjlsModel) -> Mats:
    d = model.state_dim
    return tuple(np.zeros((d, d)) for _ in range(model.modes))


def mjls_finite_recursions(model: MjlsModel, T: int) -> MjlsRecursion:
    """P◇_{T+1}(m)=0 から P◇_t(m) = Ω(Σ_k θ^{mk} P◇_{t+1}(k), Q◇(m), R◇(m), A◇(m), B◇(m))。"""
    if T < 0:
        raise ValueError(f"horizon must be >= 0, got {T}")
    mix = _stochastic_mix(model)
    update = _mode_update(model, mix)
    P_seq: list = [None] * (T + 2)
    K_seq: list = [None] * (T + 1)
    P_seq[T + 1] = _zeros(model)
    for t in range(T, -1, -1):
        nxt = P_seq[t + 1]
        P_seq[t] = update(nxt)
        K_seq[t] = _gains(model, nxt, mix)
    return MjlsRecursion(horizon=T, P_seq=tuple(P_seq), K_seq=tuple(K_seq))


def _gains(model: MjlsModel, P: Mats, mix: Callable[[Mats, int], np.ndarray]) -> Mats:
    return tuple(psi(mix(P, m), model.R_mode[m], model.A_mode[m], model.B_mode[m]) for m in range(model.modes))


def dcare_solve(
    model: MjlsModel,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    divergence_cap: float = DEFAULT_DIVERGENCE_CAP,
) -> DcareSolution:
    """結合代数リカッチ方程式 (DCARE) を値反復で解く。収束条件は steady_solve と同じ。"""
    mix = _stochastic_mix(model)
    outcome = value_iteration(
        _mode_update(model, mix),
        _zeros(model),
        tol=tol,
        max_iter=max_iter,
        divergence_cap=divergence_cap,
        label=f"dcare_solve(modes={model.modes})",
    )
    if outcome.status is SolveStatus.converged:
        K = _gains(model, outcome.mats, mix)
    else:
        K = tuple(np.zeros((model.input_dim, model.state_dim)) for _ in range(model.modes))
    return DcareSolution(status=outcome.status, iterations=outcome.iterations, P=outcome.mats, K=K)


def from_coupled_recursions(weights, Q_mode: Sequence, R_mode: Sequence, A_mode: Sequence, B_mode: Sequence) -> MjlsModel:
    """非負重み w^{mj} の結合再帰 P^m = Ω(Σ_j w^{mj} P^j, Q^m, R^m, A^m, B^m) を補助 MJLS に変換する。

    行和 s_m で正規化し A^m ← √s_m A^m, R^m ← R^m / s_m, Θ ← w / s_m とすると P の再帰は一致する。
    ゲインは元の再帰のものの 1/√s_m 倍になる。
    """
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    if W.shape[0] != W.shape[1] or W.shape[0] != len(A_mode):
        raise DimensionError(f"weights {W.shape} do not match {len(A_mode)} modes")
    if np.any(W < 0):
        raise ModelStructureError("coupling weights must be nonnegative")
    s = W.sum(axis=1)
    if np.any(s <= 0):
        raise ModelStructureError("every mode needs a positive total coupling weight")
    return MjlsModel(
        A_mode=tuple(np.sqrt(s_m) * np.asarray(A, dtype=float) for s_m, A in zip(s, A_mode)),
        B_mode=tuple(np.asarray(B, dtype=float) for B in B_mode),
        Q_mode=tuple(np.asarray(Q, dtype=float) for Q in Q_mode),
        R_mode=tuple(np.asarray(R, dtype=float) / s_m for s_m, R in zip(s, R_mode)),
        theta=W / s[:, None],
    )


def weighted_recursions(weights, Q_mode, R_mode, A_mode, B_mode, T: int) -> Tuple[Mats, ...]:
    """重みを正規化しないままの結合再帰。[t][m] (t=0..T+1)。"""
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    d = np.shape(A_mode[0])[0]
    seq: list = [None] * (T + 2)
    seq[T + 1] = tuple(np.zeros((d, d)) for _ in A_mode)
    for t in range(T, -1, -1):
        nxt = seq[t + 1]
        seq[t] = tuple(
            omega(sum(W[m, j] * nxt[j] for j in range(len(nxt))), Q_mode[m], R_mode[m], A_mode[m], B_mode[m])
            for m in range(len(A_mode))
        )
    return tuple(seq)


def _check_kron_size(model: MjlsModel, max_state_dim: int, max_jump_modes: int) -> bool:
    return model.state_dim <= max_state_dim and model.modes - 1 <= max_jump_modes


def _is_absorbing_pattern(theta: np.ndarray) -> bool:
    """モード 0 が吸収的で、モード m≥1 は 0 か自分自身にだけ遷移する。"""
    M = theta.shape[0]
    if theta[0, 0] != 1.0:
        return False
    for m in range(1, M):
        others = np.delete(theta[m], [0, m])
        if np.any(others != 0.0):
            return False
    return True


def kron_assembly(theta: np.ndarray, closed_loop: Sequence[np.ndarray]) -> np.ndarray:
    """diag(M(m)⊗M(m))·(Θᵀ⊗I)。"""
    d = np.shape(closed_loop[0])[0]
    blocks = [kron(M, M) for M in closed_loop]
    return la.block_diag(*blocks) @ np.kron(np.asarray(theta).T, np.eye(d * d))


def triangular_shortcut(model: MjlsModel, closed_loop: Sequence[np.ndarray]) -> Tuple[float, ...]:
    """上三角な Kronecker 行列の対角ブロックのスペクトル半径 {ρ(M0⊗M0), θ^{mm}ρ(Mm⊗Mm)}。"""
    if not _is_absorbing_pattern(model.theta):
        raise ModelStructureError("triangular shortcut needs mode 0 absorbing and self-loops only elsewhere")
    if len(closed_loop) != model.modes:
        raise DimensionError(f"{len(closed_loop)} closed-loop matrices for {model.modes} modes")
    radii = [spectral_radius(kron(closed_loop[0], closed_loop[0]))]
    for m in range(1, model.modes):
        weight = float(model.theta[m, m])
        radii.append(0.0 if weight == 0.0 else weight * spectral_radius(kron(closed_loop[m], closed_loop[m])))
    return tuple(radii)


def _stability(
    model: MjlsModel,
    closed_loop: Sequence[np.ndarray],
    max_state_dim: int,
    max_jump_modes: int,
) -> StabilityVerdict:
    d = model.state_dim
    if _check_kron_size(model, max_state_dim, max_jump_modes):
        big = kron_assembly(model.theta, closed_loop)
        rho = spectral_radius(big)
        return StabilityVerdict(schur_stable=rho < 1.0, rho=rho, matrix_dim=big.shape[0])
    logger.info("kron assembly of %d modes x d=%d exceeds the size guard; using triangular shortcut", model.modes, d)
    rho = max(triangular_shortcut(model, closed_loop))
    return StabilityVerdict(schur_stable=rho < 1.0, rho=rho, matrix_dim=model.modes * d * d)


def ss_test(
    model: MjlsModel,
    gains: Sequence[np.ndarray],
    *,
    max_state_dim: int = MAX_KRON_STATE_DIM,
    max_jump_modes: int = MAX_KRON_JUMP_MODES,
) -> StabilityVerdict:
    """確率的安定化可能性: A_s(m)=A◇(m)+B◇(m)K◇(m) による 𝒜_s のシュール安定性。"""
    if len(gains) != model.modes:
        raise DimensionError(f"{len(gains)} gains for {model.modes} modes")
    closed = []
    for m, K in enumerate(gains):
        K = np.asarray(K, dtype=float)
        if K.shape != (model.input_dim, model.state_dim):
            raise DimensionError(f"mode {m}: gain shape {K.shape}, expected {(model.input_dim, model.state_dim)}")
        closed.append(model.A_mode[m] + model.B_mode[m] @ K)
    return _stability(model, closed, max_state_dim, max_jump_modes)


def sd_test(
    model: MjlsModel,
    injections: Sequence[np.ndarray],
    *,
    max_state_dim: int = MAX_KRON_STATE_DIM,
    max_jump_modes: int = MAX_KRON_JUMP_MODES,
) -> StabilityVerdict:
    """確率的可検出性: A_d(m)=A◇(m)+H◇(m)Q◇(m)^{1/2} による 𝒜_d のシュール安定性。"""
    if len(injections) != model.modes:
        raise DimensionError(f"{len(injections)} injections for {model.modes} modes")
    closed = []
    for m, H in enumerate(injections):
        H = np.asarray(H, dtype=float)
        d = model.state_dim
        if H.shape != (d, d):
            raise DimensionError(f"mode {m}: injection shape {H.shape}, expected {(d, d)}")
        closed.append(model.A_mode[m] + H @ psd_sqrt(model.Q_mode[m], f"Q(mode {m})"))
    return _stability(model, closed, max_state_dim, max_jump_modes)


def search_detector_gains(
    model: MjlsModel,
    *,
    restarts: int = 8,
    seed: int = 0,
    max_iter: int = 4000,
) -> Tuple[np.ndarray, ...]:
    """モードごとに ρ(A◇(m)+H Q◇(m)^{1/2}) を Nelder–Mead で最小化した H◇(m) の候補。

    最初の初期値は H = −A◇(m) pinv(Q◇(m)^{1/2})、以降はその周りのランダム再始動。
    """
    rng = np.random.default_rng(seed)
    out = []
    d = model.state_dim
    for m in range(model.modes):
        A = np.asarray(model.A_mode[m])
        Qh = psd_sqrt(model.Q_mode[m], f"Q(mode {m})")
        if not np.any(Qh):
            out.append(np.zeros((d, d)))
            continue

        def radius(h: np.ndarray) -> float:
            return spectral_radius(A + h.reshape(d, d) @ Qh)

        start = -A @ np.linalg.pinv(Qh)
        best_h, best_rho = start, radius(start.ravel())
        for k in range(restarts if best_rho > SEARCH_RHO_FLOOR else 0):
            x0 = start.ravel() if k == 0 else start.ravel() + rng.standard_normal(d * d)
            res = minimize(radius, x0, method="Nelder-Mead", options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-10})
            if res.fun < best_rho:
                best_h, best_rho = res.x.reshape(d, d), float(res.fun)
        logger.debug("mode %d: detector search reached rho=%.6f", m, best_rho)
        out.append(np.asarray(best_h).reshape(d, d))
    return tuple(out)


def stabilizing_verdict(model: MjlsModel, dcare: Optional[DcareSolution] = None) -> Optional[StabilityVerdict]:
    """収束した DCARE のゲインで ss_test を行う。非収束なら None。"""
    dcare = dcare or dcare_solve(model)
    if not dcare.converged:
        return None
    return ss_test(model, dcare.K)
