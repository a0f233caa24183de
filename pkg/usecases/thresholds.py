from __future__ import annotations

import logging
from typing import List, Optional

import numpy as np
import scipy.linalg as la

from domain.linalg.blockmat import psd_sqrt
from domain.models import DncsSpec, FeasibilityVerdict, ThresholdReport

logger = logging.getLogger(__name__)

RANK_TOL = 1e-8
CLUSTER_TOL = 1e-7


def _cluster_eigenvalues(eigs: np.ndarray, tol: float) -> List[tuple[complex, int]]:
    """近接した固有値をまとめて (代表値, 代数的重複度) を返す。"""
    remaining = sorted((complex(e) for e in eigs), key=lambda z: (z.real, z.imag))
    clusters: List[List[complex]] = []
    for z in remaining:
        for group in clusters:
            if abs(z - group[0]) <= tol * (1.0 + abs(group[0])):
                group.append(z)
                break
        else:
            clusters.append([z])
    out = []
    for group in clusters:
        center = complex(np.mean(group))
        if abs(center.imag) <= tol * (1.0 + abs(center)):
            center = complex(center.real, 0.0)
        out.append((center, len(group)))
    return out


def _numerical_rank(M: np.ndarray, rank_tol: float) -> int:
    if M.size == 0:
        return 0
    s = la.svdvals(M)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def uncontrollable_modes(A, B, rank_tol: float = RANK_TOL, cluster_tol: float = CLUSTER_TOL) -> List[complex]:
    """PBH テスト rank([A−λI | B]) < n を満たす A の固有値 (重複度付き)。

    λ は計算した固有値そのもので判定する。重複度は min(代数的重複度, 階数落ち)。
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n = A.shape[0]
    modes: List[complex] = []
    for lam, mult in _cluster_eigenvalues(la.eigvals(A), cluster_tol):
        pencil = np.hstack([A - lam * np.eye(n), B]).astype(complex)
        deficiency = n - _numerical_rank(pencil, rank_tol)
        modes.extend([lam] * min(mult, deficiency))
    return sorted(modes, key=lambda z: (-abs(z), z.real, z.imag))


def undetectable_modes(A, C, rank_tol: float = RANK_TOL, cluster_tol: float = CLUSTER_TOL) -> List[complex]:
    """(A, C) の不可検出モード。双対対 (Aᵀ, Cᵀ) の不可制御モードと同一。"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.asarray(C, dtype=float).reshape(-1, A.shape[0])
    return uncontrollable_modes(A.T, C.T, rank_tol, cluster_tol)


def min_achievable_radius(A, B, rank_tol: float = RANK_TOL) -> float:
    """min_K ρ(A+BK)。不可制御固有値の最大絶対値 (なければ 0)。"""
    modes = uncontrollable_modes(A, B, rank_tol)
    return max((abs(z) for z in modes), default=0.0)


def _threshold(radius: float) -> float:
    return float("inf") if radius == 0.0 else 1.0 / radius**2


def _all_stable(modes: List[complex]) -> bool:
    return all(abs(z) < 1.0 for z in modes)


def critical_probs(spec: DncsSpec, rank_tol: float = RANK_TOL) -> ThresholdReport:
    """サブシステムごとの臨界ドロップ確率 p_c^n と仮定チェック。"""
    p_s, p_d, p_c = [], [], []
    unctrl, undet, detectable_local = [], [], []
    for n in range(1, spec.n_subsystems + 1):
        A_nn = spec.A_nn(n)
        modes_s = uncontrollable_modes(A_nn, spec.B_nn(n), rank_tol)
        modes_d = undetectable_modes(A_nn, psd_sqrt(spec.Q_nn(n), f"Q^{n}{n}"), rank_tol)
        ps = _threshold(max((abs(z) for z in modes_s), default=0.0))
        pd = _threshold(max((abs(z) for z in modes_d), default=0.0))
        detectable = _all_stable(modes_d)
        p_s.append(ps)
        p_d.append(pd)
        p_c.append(ps if detectable else min(ps, pd))
        unctrl.append(modes_s)
        undet.append(modes_d)
        detectable_local.append(detectable)

    A, B = np.asarray(spec.A_matrix), np.asarray(spec.B_matrix)
    return ThresholdReport(
        p_c=p_c,
        p_s=p_s,
        p_d=p_d,
        p_c_effective=[min(p, 1.0) for p in p_c],
        uncontrollable_modes=unctrl,
        undetectable_modes=undet,
        detectable_full=_all_stable(undetectable_modes(A, psd_sqrt(spec.Q, "Q"), rank_tol)),
        stabilizable_full=_all_stable(uncontrollable_modes(A, B, rank_tol)),
        detectable_local=detectable_local,
    )


def feasibility_verdict(
    spec: DncsSpec, rank_tol: float = RANK_TOL, report: Optional[ThresholdReport] = None
) -> FeasibilityVerdict:
    """p^n < p_c^n が全 n で成り立つときに限り有限コスト。境界は不可。"""
    report = report or critical_probs(spec, rank_tol)
    binding = [n for n, (p, pc) in enumerate(zip(spec.drop_probs, report.p_c), start=1) if p >= pc]
    return FeasibilityVerdict(feasible=not binding, binding=binding)


def assumption_warnings(spec: DncsSpec, rank_tol: float = RANK_TOL, report: Optional[ThresholdReport] = None) -> List[str]:
    report = report or critical_probs(spec, rank_tol)
    messages = []
    if not report.stabilizable_full:
        messages.append("(A, B) is not stabilizable")
    if not report.detectable_full:
        messages.append("(A, Q^1/2) is not detectable")
    for n, ok in enumerate(report.detectable_local, start=1):
        if not ok:
            messages.append(f"subsystem {n}: (A^{n}{n}, (Q^{n}{n})^1/2) is not detectable; p_c uses min(p_s, p_d)")
    return messages
