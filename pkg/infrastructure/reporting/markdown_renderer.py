from __future__ import annotations

import markdown as md_lib

from usecases.ports import MarkdownRendererPort


class DefaultMarkdownRenderer(MarkdownRendererPort):
    """サマリー Markdown -> HTML。表と整形済みコードブロックを有効にする。"""

    def __init__(self, extensions: list[str] | None = None) -> None:
        self.extensions = extensions if extensions is not None else ["tables", "fenced_code"]

    def to_html(self, markdown: str) -> str:
        return md_lib.markdown(markdown, extensions=self.extensions)
