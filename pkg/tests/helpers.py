"""
Shared fixtures for the test suite.
"""

from __future__ import annotations

import os
import unittest

import numpy as np

from chaosweights.kernel import KernelConfig
from chaosweights.library import OrbitLibrary
from chaosweights.measures import ReferenceMeasure
from chaosweights.orbits import PeriodicOrbit

__all__ = [
    "slow",
    "AB_GUESS",
    "synthetic_orbit",
    "synthetic_library",
    "discrete_example",
]

slow = unittest.skipUnless(
    os.environ.get("CHAOSWEIGHTS_SLOW") == "1", "set CHAOSWEIGHTS_SLOW=1 to run"
)

# A point close to the shortest Lorenz cycle and its period.
AB_GUESS = (np.array([-13.7636106821, -19.5787519424, 27.0]), 1.5586522)

# Periods and Floquet exponents of the short Lorenz cycles (length 2..4),
# rounded. Mirror partners share their values.
_CYCLE_DATA = {
    "AB": (1.5587, 0.9956),
    "AAB": (2.3059, 0.9710),
    "ABB": (2.3059, 0.9710),
    "AAAB": (3.0236, 0.9085),
    "AABB": (3.0843, 0.9663),
    "ABBB": (3.0236, 0.9085),
}


def synthetic_orbit(word: str, period: float | None = None, exponent: float | None = None) -> PeriodicOrbit:
    """
    An orbit record with the given word and made-up nodes, for code that only
    reads periods, exponents and words.
    """
    default_period, default_exponent = _CYCLE_DATA.get(word, (0.8 * len(word), 0.9))
    period = default_period if period is None else period
    exponent = default_exponent if exponent is None else exponent
    phases = np.linspace(0.0, 2 * np.pi, 4, endpoint=False)
    nodes = np.column_stack([10 * np.cos(phases), 10 * np.sin(phases), 25 + phases])
    return PeriodicOrbit(
        id=word,
        nodes=nodes,
        node_times=phases / (2 * np.pi) * period,
        period=period,
        symbol=word,
        floquet_exponent=exponent,
        multipliers=np.array([np.exp(exponent * period), 1.0, np.exp(-14 * period)]),
    )


def synthetic_library(words: list[str]) -> OrbitLibrary:
    return OrbitLibrary([synthetic_orbit(w) for w in words])


def discrete_example() -> tuple[list[ReferenceMeasure], np.ndarray, KernelConfig]:
    """
    Three measures on four unit-spaced points, compared by exact overlap, and
    the chaotic samples (each point once).
    """
    points = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
    measures = [
        ReferenceMeasure.atoms(points[[0, 1, 2]], [1, 1, 1], "m1"),
        ReferenceMeasure.atoms(points[[0, 1, 3]], [1, 1, 1], "m2"),
        ReferenceMeasure.atoms(points[[0, 1]], [1, 1], "m3"),
    ]
    return measures, points, KernelConfig(theta=1.0, overlap=True)
