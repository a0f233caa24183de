from __future__ import annotations

from typing import Any, Dict, Protocol, Sequence, Tuple

import numpy as np

from domain.models import NoiseKind, ScenarioJob


class NoiseSourcePort(Protocol):
    """試行ごとに独立な乱数列を供給する。(seed, run) が同じなら同じ列を返すこと。"""

    generator_name: str

    def draw(
        self, run: int, steps: int, state_dim: int, n_links: int, kind: NoiseKind
    ) -> Tuple[np.ndarray, np.ndarray]:
        """(プロセス雑音 (steps, state_dim), リンク用一様乱数 (steps, n_links))"""
        ...


class TraceSinkPort(Protocol):
    """シミュレーショントレースの書き出し先。"""

    def open(self, header: Sequence[str]) -> None:
        ...

    def write_rows(self, rows: np.ndarray) -> None:
        ...

    def close(self) -> None:
        ...


class MarkdownRendererPort(Protocol):
    """Markdown -> HTML 変換を抽象化。"""

    def to_html(self, markdown: str) -> str:
        ...


class ReportRendererPort(Protocol):
    """コマンドのレポートを人間向け Markdown にする。"""

    def render(self, command: str, report: Dict[str, Any]) -> str:
        ...


class JobStorePort(Protocol):
    """ジョブ状態の永続化を抽象化。"""

    def create(self, job: ScenarioJob) -> None:
        ...

    def get(self, job_id: str) -> "ScenarioJob | None":
        ...

    def update(self, job: ScenarioJob) -> None:
        ...
