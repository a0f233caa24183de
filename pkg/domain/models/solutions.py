from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from domain.errors import DimensionError, ModelStructureError, SolutionNotConverged
from domain.linalg.operators import PROB_TOL
from domain.models.dncs import DncsSpec, NoiseKind


class SolveStatus(str, Enum):
    converged = "converged"
    diverged = "diverged"
    max_iter = "max_iter"


@dataclass(frozen=True)
class FiniteSolution:
    """有限時間の結合リカッチ再帰の結果。

    P0_seq[t], Pn_seq[t][n-1] は t=0..T+1、K0_seq[t], Kn_seq[t][n-1] は t=0..T。
    """

    spec: DncsSpec
    horizon: int
    P0_seq: Tuple[np.ndarray, ...]
    Pn_seq: Tuple[Tuple[np.ndarray, ...], ...]
    K0_seq: Tuple[np.ndarray, ...]
    Kn_seq: Tuple[Tuple[np.ndarray, ...], ...]
    cost: float


@dataclass(frozen=True)
class SteadySolution:
    """定常解。収束しなかった場合も最後の反復値を保持し、status で区別する。"""

    spec: DncsSpec
    status: SolveStatus
    iterations: int
    P0: np.ndarray
    Pn: Tuple[np.ndarray, ...]
    K0: np.ndarray
    Kn: Tuple[np.ndarray, ...]
    Lambda: np.ndarray
    residual: float

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.converged

    @property
    def avg_cost(self) -> float:
        if not self.converged:
            return float("inf")
        return float(np.trace(self.Lambda))

    def require_converged(self) -> "SteadySolution":
        if not self.converged:
            raise SolutionNotConverged(f"steady solution is {self.status.value} after {self.iterations} iterations")
        return self


Solution = Union[SteadySolution, FiniteSolution]


@dataclass(frozen=True)
class StageGains:
    """時刻 t の戦略: 遠隔ゲイン K0 とローカルゲイン K^n。"""

    K0: np.ndarray
    Kn: Tuple[np.ndarray, ...]


def gains_at(solution: Solution, t: int) -> StageGains:
    if isinstance(solution, SteadySolution):
        return StageGains(solution.K0, solution.Kn)
    if not 0 <= t <= solution.horizon:
        raise DimensionError(f"t={t} outside horizon 0..{solution.horizon}")
    return StageGains(solution.K0_seq[t], solution.Kn_seq[t])


@dataclass(frozen=True)
class MjlsModel:
    """補助 MJLS。モード m=0..M の行列と遷移行列 Θ。"""

    A_mode: Tuple[np.ndarray, ...]
    B_mode: Tuple[np.ndarray, ...]
    Q_mode: Tuple[np.ndarray, ...]
    R_mode: Tuple[np.ndarray, ...]
    theta: np.ndarray

    def __post_init__(self) -> None:
        counts = {len(self.A_mode), len(self.B_mode), len(self.Q_mode), len(self.R_mode)}
        if len(counts) != 1:
            raise ModelStructureError("every mode needs A, B, Q and R")
        modes = counts.pop()
        theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        if theta.shape != (modes, modes):
            raise DimensionError(f"theta has shape {theta.shape}, expected ({modes}, {modes})")
        if np.any(theta < 0) or np.any(np.abs(theta.sum(axis=1) - 1.0) > PROB_TOL):
            raise ModelStructureError("theta must be row-stochastic")
        d, m = np.shape(self.B_mode[0])
        for k in range(modes):
            if np.shape(self.A_mode[k]) != (d, d) or np.shape(self.B_mode[k]) != (d, m):
                raise DimensionError(f"mode {k}: A/B shapes differ from mode 0")
            if np.shape(self.Q_mode[k]) != (d, d) or np.shape(self.R_mode[k]) != (m, m):
                raise DimensionError(f"mode {k}: Q/R shapes differ from mode 0")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def modes(self) -> int:
        return len(self.A_mode)

    @property
    def state_dim(self) -> int:
        return int(np.shape(self.A_mode[0])[0])

    @property
    def input_dim(self) -> int:
        return int(np.shape(self.B_mode[0])[1])


@dataclass(frozen=True)
class MjlsRecursion:
    """P_seq[t][m], K_seq[t][m]。P は t=0..T+1、K は t=0..T。"""

    horizon: int
    P_seq: Tuple[Tuple[np.ndarray, ...], ...]
    K_seq: Tuple[Tuple[np.ndarray, ...], ...]


@dataclass(frozen=True)
class DcareSolution:
    status: SolveStatus
    iterations: int
    P: Tuple[np.ndarray, ...]
    K: Tuple[np.ndarray, ...]

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.converged


@dataclass(frozen=True)
class StabilityVerdict:
    schur_stable: bool
    rho: float
    matrix_dim: int


@dataclass(frozen=True)
class SimConfig:
    solution: Solution
    horizon: int
    num_runs: int
    seed: int
    noise: NoiseKind = NoiseKind.normal
    record_every: int = 0
    zero_noise: bool = False
    workers: int = 1
    chunk_runs: int = 50

    def __post_init__(self) -> None:
        if self.horizon < 0 or self.num_runs < 1 or self.chunk_runs < 1 or self.workers < 1:
            raise ValueError("horizon >= 0, num_runs >= 1, chunk_runs >= 1 and workers >= 1 are required")
        if isinstance(self.solution, FiniteSolution) and self.solution.horizon != self.horizon:
            raise DimensionError(
                f"finite solution has horizon {self.solution.horizon}, simulation asks for {self.horizon}"
            )

    @property
    def spec(self) -> DncsSpec:
        return self.solution.spec


@dataclass
class SimState:
    """閉ループの状態。先頭軸に試行 (run) のバッチ次元を持ってよい。"""

    x: np.ndarray
    x_hat: np.ndarray
    sigma: Tuple[np.ndarray, ...]
    t: int = 0
    accumulated_cost: Union[float, np.ndarray] = 0.0
    u: Optional[np.ndarray] = None
    gamma: Optional[np.ndarray] = None
    stage_cost: Union[float, np.ndarray, None] = None

    @classmethod
    def initial(cls, spec: DncsSpec, runs: Optional[int] = None) -> "SimState":
        """X_0 = X̂_0 = 0, Σ_0 = 0。"""
        lead = () if runs is None else (runs,)
        d = spec.state_part.total
        sigma = tuple(np.zeros(lead + (dn, dn)) for dn in spec.state_dims)
        cost = 0.0 if runs is None else np.zeros(runs)
        return cls(x=np.zeros(lead + (d,)), x_hat=np.zeros(lead + (d,)), sigma=sigma, accumulated_cost=cost)


@dataclass(frozen=True)
class MomentPath:
    """厳密な二次モーメントの時系列。S は共通推定値、E^n は推定誤差の共分散。"""

    mean_sq_state: np.ndarray
    mean_sq_error: np.ndarray
    stage_cost: np.ndarray
    S_final: np.ndarray
    E_final: Tuple[np.ndarray, ...] = field(default_factory=tuple)

    @property
    def total_cost(self) -> float:
        return float(np.sum(self.stage_cost))
