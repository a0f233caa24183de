from __future__ import annotations

import logging
from functools import lru_cache

from pydantic import BaseSettings, Field

from usecases.run_scenario_job import RunOptions


class Settings(BaseSettings):
    app_host: str = Field("0.0.0.0", env="APP_HOST")
    app_port: int = Field(8000, env="APP_PORT")
    log_level: str = Field("info", env="LOG_LEVEL")
    # ジョブ API のクライアントに返すポーリング間隔
    poll_interval_seconds: int = Field(3, env="POLL_INTERVAL_SECONDS", ge=1)

    # ソルバ既定値（シナリオの solver{}、CLI フラグが優先）
    solver_tol: float = Field(1e-10, env="DNCS_SOLVER_TOL", gt=0)
    solver_max_iter: int = Field(100_000, env="DNCS_SOLVER_MAX_ITER", ge=1)
    divergence_cap: float = Field(1e12, env="DNCS_DIVERGENCE_CAP", gt=0)
    rank_tol: float = Field(1e-8, env="DNCS_RANK_TOL", gt=0)
    numeric_tol: float = Field(1e-9, env="DNCS_NUMERIC_TOL", gt=0)

    # シミュレーション既定値（シナリオの sim{}、CLI フラグが優先）
    sim_runs: int = Field(200, env="DNCS_SIM_RUNS", ge=1)
    sim_horizon: int = Field(5000, env="DNCS_SIM_HORIZON", ge=0)
    finite_horizon: int = Field(50, env="DNCS_FINITE_HORIZON", ge=0)
    sim_seed: int = Field(0, env="DNCS_SIM_SEED", ge=0)
    sim_workers: int = Field(1, env="DNCS_SIM_WORKERS", ge=1)
    sim_chunk_runs: int = Field(50, env="DNCS_SIM_CHUNK_RUNS", ge=1)

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"

    def run_defaults(self) -> RunOptions:
        return RunOptions(
            tol=self.solver_tol,
            max_iter=self.solver_max_iter,
            divergence_cap=self.divergence_cap,
            rank_tol=self.rank_tol,
            numeric_tol=self.numeric_tol,
            runs=self.sim_runs,
            horizon=self.sim_horizon,
            finite_horizon=self.finite_horizon,
            seed=self.sim_seed,
            workers=self.sim_workers,
            chunk_runs=self.sim_chunk_runs,
        )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()


def configure_logging(settings: Settings) -> None:
    """ログは stderr へ。stdout は JSON レポート専用。"""
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
