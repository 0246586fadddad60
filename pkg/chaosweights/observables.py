"""
Observables: the monomial set used to judge estimates, kernel observables,
and weighted-average estimates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import numpy.typing as npt

from .errors import PreconditionError, UnsupportedInputError
from .kernel import KernelConfig, kernel_observable
from .measures import ReferenceMeasure
from .weights import WeightVector

__all__ = [
    "Observable",
    "BASIS_TAGS",
    "LYAPUNOV_TAG",
    "get_observable",
    "basis",
    "estimate_average",
    "lyapunov_estimate",
]

BASIS_TAGS = ("1", "x", "y", "z", "x2", "xy", "xz", "y2", "yz", "z2")
LYAPUNOV_TAG = "lyapunov"

# Odd under (x, y, z) -> (-x, -y, z), so zero on the symmetric attractor.
ODD_TAGS = frozenset({"x", "y", "xz", "yz"})

_MONOMIALS: dict[str, Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]]] = {
    "1": lambda s: np.ones(len(s)),
    "x": lambda s: s[:, 0],
    "y": lambda s: s[:, 1],
    "z": lambda s: s[:, 2],
    "x2": lambda s: s[:, 0] ** 2,
    "xy": lambda s: s[:, 0] * s[:, 1],
    "xz": lambda s: s[:, 0] * s[:, 2],
    "y2": lambda s: s[:, 1] ** 2,
    "yz": lambda s: s[:, 1] * s[:, 2],
    "z2": lambda s: s[:, 2] ** 2,
}


@dataclass(frozen=True)
class Observable:
    """
    A real function on states, evaluated on ``(n, 3)`` arrays.

    :param tag: Name written to result files.
    """

    tag: str
    func: Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]]

    def __call__(self, states: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        return np.asarray(self.func(states), dtype=np.float64)

    @property
    def is_odd(self) -> bool:
        return self.tag in ODD_TAGS

    @classmethod
    def kernel(cls, measure: ReferenceMeasure, theta: float | KernelConfig) -> Observable:
        "The observable ``a_p`` tied to a reference measure."
        return cls(
            f"kernel({measure.id})",
            lambda s: np.atleast_1d(kernel_observable(measure, s, theta)),
        )

    @classmethod
    def indicator(cls, point: Sequence[float], tag: str = "indicator") -> Observable:
        "One exactly at ``point``, zero elsewhere."
        target = np.asarray(point, dtype=np.float64)
        return cls(tag, lambda s: np.all(s == target, axis=1).astype(np.float64))

    @classmethod
    def custom(
        cls, tag: str, func: Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]]
    ) -> Observable:
        return cls(tag, func)


def get_observable(tag: str) -> Observable:
    try:
        return Observable(tag, _MONOMIALS[tag])
    except KeyError:
        raise PreconditionError(
            f"unknown observable {tag!r}; expected one of {', '.join(BASIS_TAGS)}"
        )


def basis() -> list[Observable]:
    "The ten monomials of degree at most two."
    return [get_observable(tag) for tag in BASIS_TAGS]


def estimate_average(w: WeightVector | Sequence[float], per_measure: Sequence[float]) -> float:
    """
    ``sum_p w_p E_p[a]``.
    """
    weights = w.w if isinstance(w, WeightVector) else np.asarray(w, dtype=np.float64)
    values = np.asarray(per_measure, dtype=np.float64)
    if weights.shape != values.shape:
        raise PreconditionError(
            f"{len(weights)} weights but {len(values)} measure averages"
        )
    return float(weights @ values)


def lyapunov_estimate(w: WeightVector, exponents: Sequence[float | None]) -> float:
    """
    Weighted sum of orbit Floquet exponents. Only defined for orbit
    references.
    """
    if w.kind != "orbit" or any(e is None for e in exponents):
        raise UnsupportedInputError("the Lyapunov estimate needs periodic orbit references")
    return estimate_average(w, [float(e) for e in exponents])  # type: ignore[arg-type]
