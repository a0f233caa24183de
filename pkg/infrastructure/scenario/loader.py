from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict

from pydantic import ValidationError

from domain.errors import ScenarioError
from domain.models import Scenario


def _reject_constant(name: str) -> Any:
    raise ValueError(f"{name} is not allowed in scenario inputs")


def _format_location(loc) -> str:
    return " -> ".join(str(part) for part in loc)


def parse_scenario(text: str, *, source: str = "<scenario>") -> Scenario:
    """JSON 文字列を検証済み Scenario にする。エラーは位置付きの ScenarioError。"""
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, location=f"{source}: line {exc.lineno} column {exc.colno}") from exc
    except ValueError as exc:
        raise ScenarioError(str(exc), location=source) from exc
    return scenario_from_dict(data, source=source)


def scenario_from_dict(data: Dict[str, Any], *, source: str = "<scenario>") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("top level must be a JSON object", location=source)
    try:
        return Scenario.parse_obj(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = f"{source}: {_format_location(first['loc'])}"
        extra = len(exc.errors()) - 1
        message = first["msg"] + (f" (and {extra} more errors)" if extra else "")
        raise ScenarioError(message, location=location) from exc


def load_scenario(path: Path | str) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", location=str(path)) from exc
    return parse_scenario(text, source=str(path))
