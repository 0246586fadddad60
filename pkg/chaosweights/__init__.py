from __future__ import annotations

from .errors import ChaosWeightsError
from .kernel import CorrelationSystem, build_system
from .library import OrbitLibrary, build_complete_library
from .weights import WeightVector, solve_tikhonov

__version__ = "0.1.0"

__all__ = [
    "ChaosWeightsError",
    "CorrelationSystem",
    "OrbitLibrary",
    "WeightVector",
    "build_complete_library",
    "build_system",
    "solve_tikhonov",
]
