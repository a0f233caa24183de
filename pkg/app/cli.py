from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app.report_renderer import SummaryRenderer
from app.settings import configure_logging, get_settings
from domain.errors import DncsError
from domain.models import Command
from infrastructure.scenario.loader import load_scenario
from usecases.run_scenario_job import EXIT_NUMERIC, execute_command, resolve_options

logger = logging.getLogger(__name__)

EXIT_USAGE = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dncs",
        description="ネットワーク化制御系の分散最適制御器の解析・求解・シミュレーション",
    )
    parser.add_argument("command", choices=[c.value for c in Command])
    parser.add_argument("--scenario", required=True, metavar="PATH", help="シナリオ JSON")
    parser.add_argument("--out", metavar="PATH", help="JSON レポートの出力先 (既定は stdout)")
    parser.add_argument("--seed", type=int, help="乱数シード")
    parser.add_argument("--tol", type=float, help="反復の収束判定しきい値")
    parser.add_argument("--max-iter", dest="max_iter", type=int, help="反復回数の上限")
    parser.add_argument("--runs", type=int, help="モンテカルロの試行数")
    parser.add_argument("--horizon", type=int, help="シミュレーション長 / finite の T")
    parser.add_argument("--trace", dest="trace_path", metavar="PATH", help="トレース CSV の出力先")
    return parser


def _dump(report: dict) -> str:
    # allow_nan=False: inf/nan は to_jsonable で文字列化済み
    return json.dumps(report, ensure_ascii=False, indent=2, sort_keys=True, allow_nan=False) + "\n"


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0

    settings = get_settings()
    configure_logging(settings)
    command = Command(args.command)
    overrides = {
        "seed": args.seed,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "runs": args.runs,
        "horizon": args.horizon,
        "trace_path": args.trace_path,
    }
    try:
        scenario = load_scenario(args.scenario)
        options = resolve_options(scenario, settings.run_defaults(), overrides)
        outcome = execute_command(command, scenario, options)
    except DncsError as exc:
        logger.error("%s failed: %s", command.value, exc)
        return exc.exit_code
    except (ValueError, ArithmeticError, OSError) as exc:
        logger.exception("%s failed: %s", command.value, exc)
        return EXIT_NUMERIC

    text = _dump(outcome.report)
    out_path = args.out or scenario.outputs.report
    if out_path:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    sys.stderr.write(SummaryRenderer().render(command.value, outcome.report))
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
