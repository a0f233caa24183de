from __future__ import annotations

import csv
from pathlib import Path
from typing import IO, List, Optional, Sequence

import numpy as np

from usecases.ports import TraceSinkPort


def trace_header(state_dim: int, n_links: int, input_dim: int) -> List[str]:
    """t,run,x_<i>...,xhat_<i>...,gamma_<n>...,u_<j>...,cost (i, j は 0 始まり、n は 1 始まり)"""
    return (
        ["t", "run"]
        + [f"x_{i}" for i in range(state_dim)]
        + [f"xhat_{i}" for i in range(state_dim)]
        + [f"gamma_{n}" for n in range(1, n_links + 1)]
        + [f"u_{j}" for j in range(input_dim)]
        + ["cost"]
    )


class CsvTraceWriter(TraceSinkPort):
    """トレースを CSV に書き出す。t, run, gamma は整数、それ以外は repr 精度の浮動小数。"""

    def __init__(self, path: Path | str) -> None:
        self.path = Path(path)
        self._fh: Optional[IO[str]] = None
        self._writer = None
        self._int_cols: List[int] = []

    def open(self, header: Sequence[str]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(header)
        self._int_cols = [i for i, name in enumerate(header) if name in ("t", "run") or name.startswith("gamma_")]

    def write_rows(self, rows: np.ndarray) -> None:
        if self._writer is None:
            raise RuntimeError("trace writer is not open")
        for row in np.atleast_2d(rows):
            out = [repr(float(v)) for v in row]
            for i in self._int_cols:
                out[i] = str(int(row[i]))
            self._writer.writerow(out)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
            self._writer = None

    def __enter__(self) -> "CsvTraceWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
