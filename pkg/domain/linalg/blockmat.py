from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from domain.errors import DimensionError, NotPsdError, NotSymmetricError

DEFAULT_TOL = 1e-9


def _as_finite(M, name: str = "matrix") -> np.ndarray:
    arr = np.atleast_2d(np.asarray(M, dtype=float))
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class Partition:
    """サブシステム次元のリスト (d_X^n や d_U^n)。"""

    dims: Tuple[int, ...]

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d <= 0 for d in dims):
            raise DimensionError(f"partition entries must be positive, got {self.dims}")
        object.__setattr__(self, "dims", dims)

    def __len__(self) -> int:
        return len(self.dims)

    @property
    def total(self) -> int:
        return sum(self.dims)

    def offsets(self) -> Tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate(([0], np.cumsum(self.dims))))

    def slice(self, index: int) -> slice:
        """1 始まりのブロック番号に対応するスライス。"""
        if not 1 <= index <= len(self.dims):
            raise DimensionError(f"block index {index} out of range 1..{len(self.dims)}")
        off = self.offsets()
        return slice(off[index - 1], off[index])


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """ブロック分割付きの密行列。

    ブロック番号は数式の [M]_{i,j} に合わせて 1 始まり。生成後は読み取り専用。
    """

    data: np.ndarray
    row_part: Partition
    col_part: Partition

    def __post_init__(self) -> None:
        data = np.array(_as_finite(self.data, "BlockMatrix.data"), copy=True)
        row_part = self.row_part if isinstance(self.row_part, Partition) else Partition(tuple(self.row_part))
        col_part = self.col_part if isinstance(self.col_part, Partition) else Partition(tuple(self.col_part))
        if data.shape != (row_part.total, col_part.total):
            raise DimensionError(
                f"data shape {data.shape} does not match partition ({row_part.total}, {col_part.total})"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "row_part", row_part)
        object.__setattr__(self, "col_part", col_part)

    def __array__(self, dtype=None) -> np.ndarray:
        return self.data if dtype is None else self.data.astype(dtype)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    @property
    def block_shape(self) -> Tuple[int, int]:
        return len(self.row_part), len(self.col_part)

    def block(self, i: int, j: int) -> np.ndarray:
        return self.data[self.row_part.slice(i), self.col_part.slice(j)]

    def block_row(self, i: int) -> np.ndarray:
        return self.data[self.row_part.slice(i), :]

    def block_col(self, j: int) -> np.ndarray:
        return self.data[:, self.col_part.slice(j)]

    def blocks(self) -> Iterator[Tuple[int, int, np.ndarray]]:
        for i in range(1, len(self.row_part) + 1):
            for j in range(1, len(self.col_part) + 1):
                yield i, j, self.block(i, j)

    def with_data(self, data) -> "BlockMatrix":
        return BlockMatrix(np.asarray(data, dtype=float), self.row_part, self.col_part)

    def zeros_like(self) -> "BlockMatrix":
        return self.with_data(np.zeros(self.shape))

    @classmethod
    def from_blocks(cls, grid: Sequence[Sequence[np.ndarray]]) -> "BlockMatrix":
        rows = tuple(np.atleast_2d(row[0]).shape[0] for row in grid)
        cols = tuple(np.atleast_2d(b).shape[1] for b in grid[0])
        data = np.block([[np.atleast_2d(np.asarray(b, dtype=float)) for b in row] for row in grid])
        return cls(data, Partition(rows), Partition(cols))

    @classmethod
    def square(cls, data, dims: Sequence[int]) -> "BlockMatrix":
        part = Partition(tuple(dims))
        return cls(np.asarray(data, dtype=float), part, part)


def symmetrize(M) -> np.ndarray:
    arr = np.asarray(M, dtype=float)
    return 0.5 * (arr + arr.T)


def spectral_radius(M) -> float:
    """max |λ|。複素固有値対があり得るので一般固有値ソルバ (Schur 分解) を使う。丸めはしない。"""
    arr = _as_finite(M, "M")
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"spectral_radius needs a square matrix, got {arr.shape}")
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(la.eigvals(arr))))


def kron(A, B) -> np.ndarray:
    return np.kron(_as_finite(A, "A"), _as_finite(B, "B"))


class PsdOrder(str, Enum):
    less_equal = "A<=B"
    greater_equal = "A>=B"
    equal = "equal"
    incomparable = "incomparable"


def check_symmetric(M, name: str = "matrix", tol: float = DEFAULT_TOL) -> np.ndarray:
    arr = _as_finite(M, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got {arr.shape}")
    scale = max(1.0, float(np.max(np.abs(arr)))) if arr.size else 1.0
    if arr.size and np.max(np.abs(arr - arr.T)) > tol * scale:
        raise NotSymmetricError(f"{name} is not symmetric")
    return symmetrize(arr)


def psd_order(A, B, tol: float = DEFAULT_TOL) -> PsdOrder:
    """B−A の固有値の符号で半正定値順序を判定する。"""
    a = check_symmetric(A, "A", tol)
    b = check_symmetric(B, "B", tol)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    eig = np.linalg.eigvalsh(b - a)
    ge = bool(np.all(eig >= -tol))
    le = bool(np.all(eig <= tol))
    if ge and le:
        return PsdOrder.equal
    if ge:
        return PsdOrder.less_equal
    if le:
        return PsdOrder.greater_equal
    return PsdOrder.incomparable


def is_psd(M, tol: float = DEFAULT_TOL) -> bool:
    return bool(np.all(np.linalg.eigvalsh(symmetrize(M)) >= -tol))


def is_pd(M, tol: float = DEFAULT_TOL) -> bool:
    return bool(np.all(np.linalg.eigvalsh(symmetrize(M)) > tol))


def psd_sqrt(Q, name: str = "Q", clip: float = 1e-10) -> np.ndarray:
    """主平方根 Q^{1/2}。-clip までの負固有値は 0 に切り上げ、それ未満はエラー。"""
    q = check_symmetric(Q, name)
    w, V = np.linalg.eigh(q)
    if np.any(w < -clip):
        raise NotPsdError(f"{name} is not PSD (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return symmetrize((V * np.sqrt(w)) @ V.T)
