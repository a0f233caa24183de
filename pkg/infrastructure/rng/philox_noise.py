from __future__ import annotations

from typing import Tuple

import numpy as np

from domain.models import NoiseKind
from usecases.ports import NoiseSourcePort


class PhiloxNoiseSource(NoiseSourcePort):
    """カウンタベースの Philox による試行ごとのサブストリーム。

    試行 r の列は SeedSequence(entropy=seed, spawn_key=(r,)) から作るので、
    並列実行やチャンク分割の順序に依存しない。
    """

    generator_name = "numpy.random.Philox"

    def __init__(self, seed: int) -> None:
        self.seed = int(seed)

    def generator(self, run: int) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(int(run),))
        return np.random.Generator(np.random.Philox(seq))

    def draw(
        self, run: int, steps: int, state_dim: int, n_links: int, kind: NoiseKind = NoiseKind.normal
    ) -> Tuple[np.ndarray, np.ndarray]:
        gen = self.generator(run)
        if kind is NoiseKind.rademacher:
            noise = gen.integers(0, 2, size=(steps, state_dim)).astype(float) * 2.0 - 1.0
        else:
            noise = gen.standard_normal((steps, state_dim))
        uniforms = gen.random((steps, n_links))
        return noise, uniforms


class ZeroNoiseSource(NoiseSourcePort):
    """W ≡ 0。リンクの一様乱数は Philox から引く。"""

    def __init__(self, seed: int) -> None:
        self._inner = PhiloxNoiseSource(seed)
        self.generator_name = self._inner.generator_name

    def draw(
        self, run: int, steps: int, state_dim: int, n_links: int, kind: NoiseKind = NoiseKind.normal
    ) -> Tuple[np.ndarray, np.ndarray]:
        _, uniforms = self._inner.draw(run, steps, state_dim, n_links, kind)
        return np.zeros((steps, state_dim)), uniforms
