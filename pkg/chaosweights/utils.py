"""
For internal use only.
"""

from __future__ import annotations

import math
import zlib
from typing import Iterable

import numpy as np

from .errors import FileFormatError, VersionMismatchError

__all__ = [
    "format_float",
    "parse_key_values",
    "read_header",
    "seed_stream",
    "uniform_spacing",
    "trapezoid_weights",
    "periodic_trapezoid_weights",
]

# All stored floats use 17 significant digits, which round-trips IEEE doubles.
FLOAT_FORMAT = ".17g"


def format_float(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def format_floats(values: Iterable[float], sep: str = " ") -> str:
    return sep.join(format_float(v) for v in values)


def parse_key_values(tokens: Iterable[str], lineno: int | None = None) -> dict[str, str]:
    """
    Parse ``key=value`` tokens into a dictionary.
    """
    result: dict[str, str] = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise FileFormatError(f"expected key=value, got {token!r}", lineno)
        result[key] = value
    return result


def read_header(line: str, magic: str, version: str, lineno: int = 1) -> dict[str, str]:
    """
    Validate the first line of a data file, e.g. ``ORBITLIB v1 count=3``, and
    return its ``key=value`` fields.
    """
    parts = line.split()
    if not parts or parts[0] != magic:
        raise FileFormatError(f"expected {magic} header", lineno)
    if len(parts) < 2:
        raise FileFormatError("missing format version", lineno)
    if parts[1] != version:
        raise VersionMismatchError(
            f"{magic} version {parts[1]!r} is not supported (expected {version})",
            lineno,
        )
    return parse_key_values(parts[2:], lineno)


def parse_float(text: str, lineno: int | None = None) -> float:
    try:
        return float(text)
    except ValueError:
        raise FileFormatError(f"not a number: {text!r}", lineno)


def parse_int(text: str, lineno: int | None = None) -> int:
    try:
        return int(text)
    except ValueError:
        raise FileFormatError(f"not an integer: {text!r}", lineno)


def seed_stream(master_seed: int, name: str, *extra: int) -> np.random.Generator:
    """
    Independent, reproducible random generator for a named sub-stream of the
    master seed. (E.g. "snippets", "permutations", "truth-seeds".)
    """
    key = [int(master_seed), zlib.crc32(name.encode("utf-8")), *map(int, extra)]
    return np.random.default_rng(np.random.SeedSequence(key))


def uniform_spacing(duration: float, max_spacing: float) -> tuple[int, float]:
    """
    Number of intervals and spacing so that ``n * dt == duration`` and
    ``dt <= max_spacing``.
    """
    n = max(1, math.ceil(duration / max_spacing - 1e-9))
    return n, duration / n


def trapezoid_weights(n_points: int) -> np.ndarray:
    """
    Normalized composite trapezoid weights for ``n_points`` uniform samples
    that include both end points.
    """
    if n_points == 1:
        return np.ones(1)
    w = np.full(n_points, 1.0 / (n_points - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def periodic_trapezoid_weights(n_points: int) -> np.ndarray:
    """
    Normalized trapezoid weights for a closed curve sampled at ``n_points``
    distinct, uniformly spaced phases.
    """
    return np.full(n_points, 1.0 / n_points)
