"""
Terminal output: a logging handler and a small table printer, both rendering
through prompt_toolkit so that colors are dropped automatically when the
stream is not a terminal.
"""

from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from prompt_toolkit.formatted_text import HTML, FormattedText, StyleAndTextTuples
from prompt_toolkit.shortcuts import print_formatted_text
from prompt_toolkit.styles import BaseStyle

from .style import get_style
from .utils import format_float

__all__ = ["ConsoleHandler", "OutputPrinter", "configure_logging"]

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class ConsoleHandler(logging.Handler):
    """
    Log handler that prints ``LEVEL message`` lines to ``stream`` (stderr by
    default), the level name styled by severity.
    """

    def __init__(self, style: BaseStyle, stream: IO[str] | None = None) -> None:
        super().__init__()
        self.style = style
        self.stream = stream

    def emit(self, record: logging.LogRecord) -> None:
        try:
            css = f"level-{record.levelname.lower()}"
            if record.levelno >= logging.ERROR:
                css = "level-error"
            text = HTML("<{}>{}</{}> {}").format(
                css, record.levelname, css, self.format(record)
            )
            print_formatted_text(
                text,
                style=self.style,
                file=self.stream if self.stream is not None else sys.stderr,
                include_default_pygments_style=False,
            )
        except Exception:
            self.handleError(record)


def configure_logging(
    verbosity: int,
    *,
    style: BaseStyle | None = None,
    stream: IO[str] | None = None,
    log_file: str | None = None,
) -> list[logging.Handler]:
    """
    Route the ``chaosweights`` loggers to the console, and optionally to a
    timestamped file that always records INFO and above.

    :param verbosity: 0 for warnings only, 1 for info, 2 or more for debug.
        Negative values keep only errors.
    :returns: The installed handlers, so callers can remove them again.
    """
    level = {-1: logging.ERROR, 0: logging.WARNING, 1: logging.INFO}.get(
        max(min(verbosity, 2), -1), logging.DEBUG
    )
    root = logging.getLogger("chaosweights")
    handlers: list[logging.Handler] = []

    console = ConsoleHandler(style or get_style(), stream)
    console.setLevel(level)
    handlers.append(console)

    if log_file:
        file_handler = logging.FileHandler(log_file, mode="a")
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        file_handler.setLevel(min(level, logging.INFO))
        handlers.append(file_handler)

    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(min(h.level for h in handlers))
    return handlers


def _cell(value: object) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


@dataclass
class OutputPrinter:
    """
    Prints command results.

    Usage::

        printer = OutputPrinter(style=get_style())
        printer.display_table(["observable", "E_hat"], rows)
    """

    style: BaseStyle = field(default_factory=get_style)
    stream: IO[str] | None = None

    def _print_formatted_text(self, line: StyleAndTextTuples | HTML) -> None:
        print_formatted_text(
            line if isinstance(line, HTML) else FormattedText(line),
            style=self.style,
            file=self.stream if self.stream is not None else sys.stdout,
            include_default_pygments_style=False,
        )

    def display_table(
        self, headers: Sequence[str], rows: Iterable[Sequence[object]]
    ) -> None:
        """
        Left aligned columns; the first column is styled as a key. Missing
        values (``None``) print as ``-``.
        """
        cells = [[_cell(v) for v in row] for row in rows]
        widths = [
            max([len(h)] + [len(row[i]) for row in cells])
            for i, h in enumerate(headers)
        ]

        header: StyleAndTextTuples = []
        for h, width in zip(headers, widths):
            header.append(("class:table.header", h))
            header.append(("", " " * (width - len(h) + 2)))
        self._print_formatted_text(header)

        for row in cells:
            line: StyleAndTextTuples = []
            for i, (text, width) in enumerate(zip(row, widths)):
                if i == 0:
                    css = "class:table.key"
                elif text == "-":
                    css = "class:table.missing"
                else:
                    css = "class:table.value"
                line.append((css, text))
                line.append(("", " " * (width - len(text) + 2)))
            self._print_formatted_text(line)

    def display_written(self, path: str, what: str, count: int | None = None) -> None:
        "One line telling where the result of a command went."
        if count is None:
            self._print_formatted_text(HTML("wrote {} to <path>{}</path>").format(what, path))
        else:
            self._print_formatted_text(
                HTML("wrote <count>{}</count> {} to <path>{}</path>").format(count, what, path)
            )

    def display_value(self, name: str, value: float) -> None:
        self._print_formatted_text(
            [("class:table.key", name), ("", " = "), ("class:table.value", format_float(value))]
        )
