from __future__ import annotations

from prompt_toolkit.styles import BaseStyle, Style

__all__ = ["get_style", "default_ui_style", "plain_ui_style"]


def get_style(color: bool = True) -> BaseStyle:
    """
    Style for terminal output. ``color=False`` keeps the markup but drops
    all colors (used for ``NO_COLOR``).
    """
    return Style.from_dict(default_ui_style if color else plain_ui_style)


# Log records.
default_ui_style = {
    "level-debug": "#888888",
    "level-info": "ansigreen",
    "level-warning": "ansiyellow bold",
    "level-error": "ansired bold",
    "logger": "#888888 italic",
    # Tables.
    "table.header": "bold underline",
    "table.key": "ansicyan",
    "table.value": "",
    "table.missing": "#888888 italic",
    # Summaries after a command finished.
    "path": "underline",
    "count": "bold",
}

plain_ui_style = {name: "noinherit" for name in default_ui_style}
