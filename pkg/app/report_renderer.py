from __future__ import annotations

from pathlib import Path
from typing import Any, Dict

import yaml
from jinja2 import Environment, StrictUndefined

from usecases.ports import ReportRendererPort

DEFAULT_TEMPLATES = Path(__file__).parent / "templates" / "summary.yaml"


def _num(value: Any, digits: int = 6) -> str:
    """数値を短く整形する。"inf" などの文字列と None はそのまま。"""
    if value is None:
        return "-"
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return f"{value:.{digits}g}"
    return str(value)


class SummaryRenderer(ReportRendererPort):
    """YAML に置いた jinja2 テンプレートからコマンドごとのサマリ Markdown を作る。"""

    def __init__(self, template_path: Path | str | None = None):
        path = Path(template_path) if template_path else DEFAULT_TEMPLATES
        self.templates: Dict[str, str] = yaml.safe_load(path.read_text(encoding="utf-8"))
        self.env = Environment(undefined=StrictUndefined, autoescape=False, keep_trailing_newline=True)
        self.env.filters["num"] = _num

    def render(self, command: str, report: Dict[str, Any]) -> str:
        if command not in self.templates:
            raise KeyError(f"no summary template for command {command!r}")
        return self.env.from_string(self.templates[command]).render(report=report)
