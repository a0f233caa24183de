from __future__ import annotations


class DncsError(Exception):
    """本パッケージの例外の基底。exit_code は CLI の終了コードに対応する。"""

    exit_code: int = 4


class ScenarioError(DncsError):
    """シナリオ JSON のパース/検証エラー。location は "line 3 column 5" や "spec -> R"。"""

    exit_code = 2

    def __init__(self, message: str, *, location: str | None = None) -> None:
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class DimensionError(DncsError, ValueError):
    exit_code = 2


class NotSymmetricError(DncsError, ValueError):
    exit_code = 2


class NotPsdError(DncsError, ValueError):
    exit_code = 2


class IllPosedCostError(DncsError, ArithmeticError):
    """R + BᵀPB が数値的に正定値でない。"""

    exit_code = 4


class ModelStructureError(DncsError, ValueError):
    """遷移行列などが想定パターンに合わない。"""

    exit_code = 2


class SolutionNotConverged(DncsError):
    """収束していない定常解を要求する操作に渡された。"""

    exit_code = 3


class SimulationDiverged(DncsError, ArithmeticError):
    exit_code = 4

    def __init__(self, message: str, *, step: int | None = None) -> None:
        self.step = step
        super().__init__(message if step is None else f"step {step}: {message}")


class InfeasibleError(DncsError):
    """ドロップ確率が臨界値以上で、有限の最適コストが存在しない。"""

    exit_code = 3
