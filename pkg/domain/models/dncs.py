from __future__ import annotations

from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, validator

from domain.errors import DimensionError, NotPsdError
from domain.linalg.blockmat import BlockMatrix, Partition, check_symmetric, is_pd, is_psd

MATRIX_TOL = 1e-9


def _to_matrix(value: Any) -> np.ndarray:
    arr = np.atleast_2d(np.array(value, dtype=float))
    if arr.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite numbers")
    arr.setflags(write=False)
    return arr


class DncsSpec(BaseModel):
    """プラント・コスト・リンクの記述。N 個のローカル制御器と 1 個のリモート制御器。

    A_blocks[n-1] = A^nn, B_local[n-1] = B^nn, B_remote[n-1] = B^n0。
    R の第 1 ブロックはリモート入力、第 n+1 ブロックがローカル入力 n。
    """

    n_subsystems: int = Field(..., alias="n", ge=1)
    state_dims: List[int]
    input_dims: List[int]
    A_blocks: List[np.ndarray] = Field(..., alias="A")
    B_local: List[np.ndarray]
    B_remote: List[np.ndarray]
    Q: np.ndarray
    R: np.ndarray
    drop_probs: List[float] = Field(..., alias="p")

    class Config:
        extra = "forbid"
        allow_mutation = False
        arbitrary_types_allowed = True
        allow_population_by_field_name = True
        json_encoders = {np.ndarray: lambda a: a.tolist()}

    @validator("state_dims")
    def state_dims_match_n(cls, value: List[int], values: Dict[str, Any]) -> List[int]:
        n = values.get("n_subsystems")
        if n is not None and len(value) != n:
            raise DimensionError(f"state_dims has {len(value)} entries, expected n={n}")
        Partition(tuple(value))
        return value

    @validator("input_dims")
    def input_dims_match_n(cls, value: List[int], values: Dict[str, Any]) -> List[int]:
        n = values.get("n_subsystems")
        if n is not None and len(value) != n + 1:
            raise DimensionError(f"input_dims has {len(value)} entries, expected n+1={n + 1} (remote first)")
        Partition(tuple(value))
        return value

    @validator("A_blocks", "B_local", "B_remote", pre=True)
    def convert_block_lists(cls, value: Any) -> List[np.ndarray]:
        if not isinstance(value, (list, tuple)):
            raise ValueError("expected one matrix per subsystem")
        return [_to_matrix(m) for m in value]

    @validator("Q", "R", pre=True)
    def convert_matrix(cls, value: Any) -> np.ndarray:
        return _to_matrix(value)

    @validator("A_blocks")
    def check_A(cls, value: List[np.ndarray], values: Dict[str, Any]) -> List[np.ndarray]:
        dims = values.get("state_dims")
        if dims is None:
            return value
        if len(value) != len(dims):
            raise DimensionError(f"{len(value)} A blocks for {len(dims)} subsystems")
        for n, (block, d) in enumerate(zip(value, dims), start=1):
            if block.shape != (d, d):
                raise DimensionError(f"subsystem {n}: A^{n}{n} has shape {block.shape}, expected ({d}, {d})")
        return value

    @validator("B_local")
    def check_B_local(cls, value: List[np.ndarray], values: Dict[str, Any]) -> List[np.ndarray]:
        dims, inputs = values.get("state_dims"), values.get("input_dims")
        if dims is None or inputs is None:
            return value
        if len(value) != len(dims):
            raise DimensionError(f"{len(value)} B_local blocks for {len(dims)} subsystems")
        for n, block in enumerate(value, start=1):
            expected = (dims[n - 1], inputs[n])
            if block.shape != expected:
                raise DimensionError(f"subsystem {n}: B^{n}{n} has shape {block.shape}, expected {expected}")
        return value

    @validator("B_remote")
    def check_B_remote(cls, value: List[np.ndarray], values: Dict[str, Any]) -> List[np.ndarray]:
        dims, inputs = values.get("state_dims"), values.get("input_dims")
        if dims is None or inputs is None:
            return value
        if len(value) != len(dims):
            raise DimensionError(f"{len(value)} B_remote blocks for {len(dims)} subsystems")
        for n, block in enumerate(value, start=1):
            expected = (dims[n - 1], inputs[0])
            if block.shape != expected:
                raise DimensionError(f"subsystem {n}: B^{n}0 has shape {block.shape}, expected {expected}")
        return value

    @validator("Q")
    def check_Q(cls, value: np.ndarray, values: Dict[str, Any]) -> np.ndarray:
        dims = values.get("state_dims")
        if dims is not None and value.shape != (sum(dims), sum(dims)):
            raise DimensionError(f"Q has shape {value.shape}, expected {(sum(dims), sum(dims))}")
        sym = check_symmetric(value, "Q", MATRIX_TOL)
        if not is_psd(sym, MATRIX_TOL):
            raise NotPsdError("Q must be positive semi-definite")
        return value

    @validator("R")
    def check_R(cls, value: np.ndarray, values: Dict[str, Any]) -> np.ndarray:
        inputs = values.get("input_dims")
        if inputs is not None and value.shape != (sum(inputs), sum(inputs)):
            raise DimensionError(f"R has shape {value.shape}, expected {(sum(inputs), sum(inputs))}")
        sym = check_symmetric(value, "R", MATRIX_TOL)
        if not is_pd(sym, MATRIX_TOL):
            raise NotPsdError("R must be positive definite")
        return value

    @validator("drop_probs")
    def check_probs(cls, value: List[float], values: Dict[str, Any]) -> List[float]:
        n = values.get("n_subsystems")
        if n is not None and len(value) != n:
            raise DimensionError(f"{len(value)} drop probabilities for n={n}")
        for n_, p in enumerate(value, start=1):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"p^{n_}={p} is not a probability")
        return value

    @classmethod
    def two_controller(cls, A, B10, B11, Q, R, p1: float) -> "DncsSpec":
        """1 プラント・2 制御器モデル (N=1) を組み立てる。"""
        A, B10, B11 = _to_matrix(A), _to_matrix(B10), _to_matrix(B11)
        return cls(
            n=1,
            state_dims=[A.shape[0]],
            input_dims=[B10.shape[1], B11.shape[1]],
            A=[A],
            B_local=[B11],
            B_remote=[B10],
            Q=Q,
            R=R,
            p=[p1],
        )

    def with_drop_probs(self, probs: List[float]) -> "DncsSpec":
        data = self.dict(by_alias=True)
        data["p"] = list(probs)
        return DncsSpec(**data)

    @property
    def remote_input_dim(self) -> int:
        return self.input_dims[0]

    @property
    def local_input_dims(self) -> List[int]:
        return self.input_dims[1:]

    @property
    def state_part(self) -> Partition:
        return Partition(tuple(self.state_dims))

    @property
    def input_part(self) -> Partition:
        return Partition(tuple(self.input_dims))

    @property
    def A_matrix(self) -> BlockMatrix:
        """ブロック対角 A。"""
        n = self.n_subsystems
        grid = [
            [self.A_blocks[i] if i == j else np.zeros((self.state_dims[i], self.state_dims[j])) for j in range(n)]
            for i in range(n)
        ]
        return BlockMatrix.from_blocks(grid)

    @property
    def B_matrix(self) -> BlockMatrix:
        """第 1 ブロック列が B^n0、対角が B^nn。"""
        n = self.n_subsystems
        grid = []
        for i in range(n):
            row = [self.B_remote[i]]
            for j in range(n):
                row.append(self.B_local[i] if i == j else np.zeros((self.state_dims[i], self.input_dims[j + 1])))
            grid.append(row)
        return BlockMatrix.from_blocks(grid)

    @property
    def Q_matrix(self) -> BlockMatrix:
        return BlockMatrix(self.Q, self.state_part, self.state_part)

    @property
    def R_matrix(self) -> BlockMatrix:
        return BlockMatrix(self.R, self.input_part, self.input_part)

    def A_nn(self, n: int) -> np.ndarray:
        return self.A_blocks[n - 1]

    def B_nn(self, n: int) -> np.ndarray:
        return self.B_local[n - 1]

    def Q_nn(self, n: int) -> np.ndarray:
        return self.Q_matrix.block(n, n)

    def R_nn(self, n: int) -> np.ndarray:
        return self.R_matrix.block(n + 1, n + 1)

    def p_n(self, n: int) -> float:
        return self.drop_probs[n - 1]


class NoiseKind(str, Enum):
    normal = "normal"
    rademacher = "rademacher"


class SolverOptions(BaseModel):
    """未指定 (None) は Settings の既定値で埋める。"""

    tol: Optional[float] = Field(None, gt=0)
    max_iter: Optional[int] = Field(None, ge=1)
    divergence_cap: Optional[float] = Field(None, gt=0)
    rank_tol: Optional[float] = Field(None, gt=0)

    class Config:
        extra = "forbid"


class SimOptions(BaseModel):
    runs: Optional[int] = Field(None, ge=1)
    horizon: Optional[int] = Field(None, ge=0)
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    noise: NoiseKind = NoiseKind.normal
    record_every: int = Field(0, ge=0)
    zero_noise: bool = False

    class Config:
        extra = "forbid"


class OutputPaths(BaseModel):
    report: Optional[str] = None
    trace: Optional[str] = None

    class Config:
        extra = "forbid"


class Scenario(BaseModel):
    """シナリオファイル 1 件分。"""

    name: str
    spec: DncsSpec
    solver: SolverOptions = Field(default_factory=SolverOptions)
    sim: SimOptions = Field(default_factory=SimOptions)
    outputs: OutputPaths = Field(default_factory=OutputPaths)

    class Config:
        extra = "forbid"
        arbitrary_types_allowed = True
