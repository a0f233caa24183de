from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.linalg as la

from domain.errors import DimensionError, IllPosedCostError
from domain.linalg.blockmat import BlockMatrix, symmetrize

COND_TOL = 1e-12
PROB_TOL = 1e-12


def _conform(P, Q, R, A, B) -> tuple[np.ndarray, ...]:
    P, A, B = (np.asarray(M, dtype=float) for M in (P, A, B))
    n, m = B.shape
    if A.shape != (n, n) or P.shape != (n, n):
        raise DimensionError(f"A {A.shape} / P {P.shape} must be {n}x{n} to match B {B.shape}")
    R = np.asarray(R, dtype=float)
    if R.shape != (m, m):
        raise DimensionError(f"R {R.shape} must be {m}x{m} to match B {B.shape}")
    if Q is not None:
        Q = np.asarray(Q, dtype=float)
        if Q.shape != (n, n):
            raise DimensionError(f"Q {Q.shape} must be {n}x{n}")
    return P, Q, R, A, B


def _gain_factor(P: np.ndarray, R: np.ndarray, A: np.ndarray, B: np.ndarray, cond_tol: float) -> np.ndarray:
    """(R+BᵀPB)⁻¹BᵀPA を Cholesky で解く。条件が悪ければ正則化せずにエラー。"""
    if B.shape[1] == 0:
        return np.zeros((0, A.shape[1]))
    S = symmetrize(R + B.T @ P @ B)
    eig = np.linalg.eigvalsh(S)
    if eig[0] <= cond_tol * max(1.0, float(eig[-1])):
        raise IllPosedCostError(f"R + BᵀPB is not positive definite (eigenvalues {eig[0]:.3e}..{eig[-1]:.3e})")
    try:
        factor = la.cho_factor(S, lower=True)
    except la.LinAlgError as exc:
        raise IllPosedCostError(f"Cholesky factorization failed: {exc}") from exc
    return la.cho_solve(factor, B.T @ P @ A)


def omega(P, Q, R, A, B, *, cond_tol: float = COND_TOL) -> np.ndarray:
    """Ω(P,Q,R,A,B) = Q + AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA (対称化済み)。"""
    P, Q, R, A, B = _conform(P, Q, R, A, B)
    G = _gain_factor(P, R, A, B, cond_tol)
    return symmetrize(Q + A.T @ P @ A - A.T @ P @ B @ G)


def psi(P, R, A, B, *, cond_tol: float = COND_TOL) -> np.ndarray:
    """Ψ(P,R,A,B) = −(R+BᵀPB)⁻¹BᵀPA。"""
    P, _, R, A, B = _conform(P, None, R, A, B)
    return -_gain_factor(P, R, A, B, cond_tol)


def phi(P, K, Q, R, A, B) -> np.ndarray:
    """Φ(P,K,Q,R,A,B) = Q + KᵀRK + (A+BK)ᵀP(A+BK)。"""
    P, Q, R, A, B = _conform(P, Q, R, A, B)
    K = np.asarray(K, dtype=float)
    if K.shape != (B.shape[1], A.shape[0]):
        raise DimensionError(f"K {K.shape} must be {B.shape[1]}x{A.shape[0]}")
    closed = A + B @ K
    return symmetrize(Q + K.T @ R @ K + closed.T @ P @ closed)


def completion_residual(P, K, R, A, B) -> np.ndarray:
    """(K−Ψ)ᵀ(R+BᵀPB)(K−Ψ)。Φ − Ω に等しい。"""
    P, _, R, A, B = _conform(P, None, R, A, B)
    diff = np.asarray(K, dtype=float) - psi(P, R, A, B)
    return symmetrize(diff.T @ (R + B.T @ P @ B) @ diff)


def _as_block(P) -> BlockMatrix:
    if not isinstance(P, BlockMatrix):
        raise TypeError("a BlockMatrix is required to address blocks")
    return P


def l_zero(P: BlockMatrix, Q, m1: int, m2: int) -> BlockMatrix:
    """P と同じ形のゼロ行列のブロック (m1, m2) に Q を置く (1 始まり)。"""
    P = _as_block(P)
    rows, cols = P.row_part.slice(m1), P.col_part.slice(m2)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    expected = (rows.stop - rows.start, cols.stop - cols.start)
    if Q.shape != expected:
        raise DimensionError(f"Q {Q.shape} does not match block ({m1},{m2}) of size {expected}")
    out = np.zeros(P.shape)
    out[rows, cols] = Q
    return P.with_data(out)


def l_iden(P: BlockMatrix, Q, m1: int) -> BlockMatrix:
    """対角ブロックは単位行列、(m1, m1) だけ Q、非対角はゼロ。"""
    P = _as_block(P)
    if P.row_part != P.col_part:
        raise DimensionError("l_iden needs a square block partition")
    rows = P.row_part.slice(m1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    size = rows.stop - rows.start
    if Q.shape != (size, size):
        raise DimensionError(f"Q {Q.shape} does not match diagonal block {m1} of size {size}")
    out = np.eye(P.shape[0])
    out[rows, rows] = Q
    return P.with_data(out)


def pi_mix(P_set: Sequence, theta_row) -> np.ndarray:
    """Σ_k θ^{mk} P(k)。"""
    theta = np.asarray(theta_row, dtype=float).ravel()
    if len(theta) != len(P_set):
        raise DimensionError(f"{len(theta)} probabilities for {len(P_set)} matrices")
    if np.any(theta < 0) or abs(theta.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"invalid probability row {theta.tolist()}")
    mats = [np.asarray(P, dtype=float) for P in P_set]
    if any(M.shape != mats[0].shape for M in mats):
        raise DimensionError("all mixed matrices must share one shape")
    return sum(w * M for w, M in zip(theta, mats))
