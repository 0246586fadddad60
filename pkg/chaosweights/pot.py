"""
Periodic orbit theory weights from a truncated spectral determinant.

The determinant ``F_n(s, beta) = 1 + sum_j Q_j`` is assembled from the trace
coefficients ``C_j`` of all prime cycles and their repeats with
``n_p r = j``. Averages follow from derivatives at the leading zero ``s_0``:
``<a> = -dF/dbeta / dF/ds``. Differentiating with respect to the average of
a single cycle yields that cycle's weight.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import numpy.typing as npt

from .errors import ConvergenceError, PreconditionError
from .library import OrbitLibrary
from .symbols import complete_library_sizes
from .weights import WeightVector

__all__ = [
    "CycleData",
    "SpectralState",
    "trace_coefficients",
    "spectral_determinant",
    "newton_root",
    "pot_weights",
    "pot_average",
    "pot_weights_prefix",
]

logger = logging.getLogger(__name__)

# Beyond this exponent |1 - e^x| is replaced by e^x.
OVERFLOW_EXPONENT = 500.0

ROOT_TOLERANCE = 1e-8
MAX_NEWTON_ITERATIONS = 100
MIN_DERIVATIVE = 1e-14


@dataclass(frozen=True, eq=False)
class CycleData:
    """
    What the cycle expansion needs from every prime orbit.

    :param lengths: Symbol lengths ``n_p``.
    :param averages: Orbit averages ``<a>_p`` of the observable of interest.
    :param multipliers: Optional ``(P, 3)`` monodromy magnitudes, for the
        exact determinant.
    """

    lengths: npt.NDArray[np.int64]
    periods: npt.NDArray[np.float64]
    exponents: npt.NDArray[np.float64]
    averages: npt.NDArray[np.float64] = field(default=None)  # type: ignore[assignment]
    multipliers: npt.NDArray[np.float64] | None = None
    ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "lengths", np.asarray(self.lengths, dtype=np.int64))
        object.__setattr__(self, "periods", np.asarray(self.periods, dtype=np.float64))
        object.__setattr__(self, "exponents", np.asarray(self.exponents, dtype=np.float64))
        size = len(self.lengths)
        averages = np.zeros(size) if self.averages is None else self.averages
        object.__setattr__(self, "averages", np.asarray(averages, dtype=np.float64))
        if not (len(self.periods) == len(self.exponents) == len(self.averages) == size):
            raise PreconditionError("cycle arrays must have equal lengths")
        if np.any(self.lengths < 2):
            raise PreconditionError("symbol lengths must be at least 2")
        if np.any(self.periods <= 0) or np.any(self.exponents <= 0):
            raise PreconditionError("periods and Floquet exponents must be positive")

    def __len__(self) -> int:
        return len(self.lengths)

    @classmethod
    def from_library(
        cls, library: OrbitLibrary, averages: Sequence[float] | None = None
    ) -> CycleData:
        return cls(
            lengths=np.array([len(o.symbol) for o in library]),
            periods=np.array([o.period for o in library]),
            exponents=np.array([o.floquet_exponent for o in library]),
            averages=None if averages is None else np.asarray(averages, dtype=np.float64),
            multipliers=np.array([o.multipliers for o in library]),
            ids=tuple(o.id for o in library),
        )

    def with_averages(self, averages: Sequence[float]) -> CycleData:
        return replace(self, averages=np.asarray(averages, dtype=np.float64))

    def head(self, count: int) -> CycleData:
        return CycleData(
            self.lengths[:count],
            self.periods[:count],
            self.exponents[:count],
            None if self.averages is None else self.averages[:count],
            None if self.multipliers is None else self.multipliers[:count],
            self.ids[:count],
        )


@dataclass
class SpectralState:
    """
    The truncated determinant and its derivatives at one ``(s, beta)``.

    ``dF_dmu_dbeta[p]`` is the mixed derivative with respect to ``beta`` and
    to the average of cycle ``p``.
    """

    n: int
    s: float
    beta: float
    C: npt.NDArray[np.float64]
    Q: npt.NDArray[np.float64]
    F: float
    dF_ds: float
    dF_dbeta: float
    dF_dmu_dbeta: npt.NDArray[np.float64]


def _log_inverse_det(
    cycles: CycleData, r: int, p: int, exact: bool
) -> float:
    "``-log |det(1 - M_p^r)|``."
    x = r * cycles.periods[p] * cycles.exponents[p]
    if exact and cycles.multipliers is not None:
        expanding, _, contracting = cycles.multipliers[p]
        log_expanding = r * math.log(expanding)
        if log_expanding > OVERFLOW_EXPONENT:
            expanding_part = log_expanding
        else:
            expanding_part = math.log(abs(expanding**r - 1.0))
        return -(expanding_part + math.log(abs(1.0 - contracting**r)))
    if x > OVERFLOW_EXPONENT:
        return -x
    return -math.log(abs(1.0 - math.exp(x)))


def _coefficients(
    cycles: CycleData, n: int, s: float, beta: float, exact: bool
) -> tuple[npt.NDArray[np.float64], ...]:
    """
    ``C_j`` and its derivatives for ``j = 1..n`` (index ``j - 1``). Per-cycle
    derivatives have shape ``(P, n)``.
    """
    size = len(cycles)
    C = np.zeros(n)
    dC_ds = np.zeros(n)
    dC_dbeta = np.zeros(n)
    dC_dmu = np.zeros((size, n))
    dC_dmu_dbeta = np.zeros((size, n))

    for p in range(size):
        n_p = int(cycles.lengths[p])
        period = cycles.periods[p]
        average = cycles.averages[p]
        for r in range(1, n // n_p + 1):
            j = n_p * r - 1
            # e^{-r T (s - beta <a>)} / |det(1 - M^r)|
            term = math.exp(
                -r * period * (s - beta * average) + _log_inverse_det(cycles, r, p, exact)
            )
            C[j] -= term / r
            dC_ds[j] += period * term
            dC_dbeta[j] -= period * average * term
            dC_dmu[p, j] -= period * beta * term
            dC_dmu_dbeta[p, j] -= period * term * (1.0 + beta * r * period * average)
    return C, dC_ds, dC_dbeta, dC_dmu, dC_dmu_dbeta


def trace_coefficients(
    cycles: CycleData, n: int, s: float, beta: float = 0.0, *, exact: bool = False
) -> npt.NDArray[np.float64]:
    """
    ``C_1..C_n``, where ``C_j`` sums ``-(1/r) e^{-r T_p (s - beta <a>_p)} /
    |1 - e^{r T_p lambda_p}|`` over cycles and repeats with ``n_p r = j``.

    :param exact: Use both transverse multipliers instead of the
        ``e^{r T lambda}`` approximation.
    """
    if n < 1:
        raise PreconditionError("truncation must be at least 1")
    if not math.isfinite(s):
        raise PreconditionError("s must be finite")
    return _coefficients(cycles, n, s, beta, exact)[0]


def _recurrence(C: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    n = len(C)
    Q = np.zeros(n)
    for j in range(1, n + 1):
        acc = C[j - 1]
        for i in range(1, j):
            acc += (j - i) / j * C[j - i - 1] * Q[i - 1]
        Q[j - 1] = acc
    return Q


def _derivative_recurrence(
    C: npt.NDArray[np.float64],
    Q: npt.NDArray[np.float64],
    dC: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """
    Derivative of the ``Q`` recurrence; ``dC`` may carry leading axes.
    """
    n = len(C)
    dQ = np.zeros_like(dC)
    for j in range(1, n + 1):
        acc = dC[..., j - 1].copy()
        for i in range(1, j):
            c = (j - i) / j
            acc += c * (dC[..., j - i - 1] * Q[i - 1] + C[j - i - 1] * dQ[..., i - 1])
        dQ[..., j - 1] = acc
    return dQ


def spectral_determinant(
    cycles: CycleData, n: int, s: float, beta: float = 0.0, *, exact: bool = False
) -> SpectralState:
    """
    ``F_n`` with the derivatives needed for averages and weights:
    ``dF/ds``, ``dF/dbeta`` and the per-cycle ``d^2 F / dmu_p dbeta``.
    """
    if n < 1:
        raise PreconditionError("truncation must be at least 1")
    C, dC_ds, dC_dbeta, dC_dmu, dC_dmu_dbeta = _coefficients(cycles, n, s, beta, exact)
    Q = _recurrence(C)
    dQ_ds = _derivative_recurrence(C, Q, dC_ds)
    dQ_dbeta = _derivative_recurrence(C, Q, dC_dbeta)
    dQ_dmu = _derivative_recurrence(C, Q, dC_dmu)

    # Second derivative: the product rule adds the cross terms to the
    # linear recurrence.
    size = len(cycles)
    d2Q = np.zeros((size, n))
    for j in range(1, n + 1):
        acc = dC_dmu_dbeta[:, j - 1].copy()
        for i in range(1, j):
            c = (j - i) / j
            k = j - i - 1
            acc += c * (
                dC_dmu_dbeta[:, k] * Q[i - 1]
                + dC_dbeta[k] * dQ_dmu[:, i - 1]
                + dC_dmu[:, k] * dQ_dbeta[i - 1]
                + C[k] * d2Q[:, i - 1]
            )
        d2Q[:, j - 1] = acc

    return SpectralState(
        n=n,
        s=s,
        beta=beta,
        C=C,
        Q=Q,
        F=1.0 + float(Q.sum()),
        dF_ds=float(dQ_ds.sum()),
        dF_dbeta=float(dQ_dbeta.sum()),
        dF_dmu_dbeta=d2Q.sum(axis=1),
    )


def newton_root(
    cycles: CycleData,
    n: int,
    *,
    tol: float = ROOT_TOLERANCE,
    max_iter: int = MAX_NEWTON_ITERATIONS,
    exact: bool = False,
) -> float:
    """
    Leading zero ``s_0`` of ``F_n(s, 0)`` by Newton's method from ``s = 0``.
    """
    s = 0.0
    for iteration in range(max_iter + 1):
        state = spectral_determinant(cycles, n, s, 0.0, exact=exact)
        if abs(state.F) < tol:
            logger.debug("root s0=%.12g after %d Newton steps", s, iteration)
            return s
        if abs(state.dF_ds) < MIN_DERIVATIVE:
            raise ConvergenceError(
                f"Newton iteration diverges: dF/ds = {state.dF_ds:.3e} at s = {s:.6g}"
            )
        s -= state.F / state.dF_ds
        if not math.isfinite(s):
            raise ConvergenceError("Newton iteration left the finite range")
    raise ConvergenceError(f"no root of F_{n} after {max_iter} Newton steps")


def pot_weights(cycles: CycleData, n: int, *, exact: bool = False) -> WeightVector:
    """
    ``w_p = -d^2F/dmu_p dbeta / dF/ds`` at ``(s_0, 0)``. Cycles longer than
    ``n`` do not enter the truncated determinant and get weight zero.
    """
    s0 = newton_root(cycles, n, exact=exact)
    state = spectral_determinant(cycles, n, s0, 0.0, exact=exact)
    w = -state.dF_dmu_dbeta / state.dF_ds
    logger.info("POT weights at n=%d: s0=%.10g, sum %.12f", n, s0, w.sum())
    return WeightVector(w, "pot", ids=list(cycles.ids))


def pot_average(cycles: CycleData, n: int, *, exact: bool = False) -> float:
    """
    ``<a> = -dF/dbeta / dF/ds`` at ``(s_0, 0)`` for the averages stored in
    ``cycles``.
    """
    s0 = newton_root(cycles, n, exact=exact)
    state = spectral_determinant(cycles, n, s0, 0.0, exact=exact)
    return -state.dF_dbeta / state.dF_ds


def pot_weights_prefix(cycles: CycleData, count: int, *, exact: bool = False) -> WeightVector:
    """
    Weights for the first ``count`` cycles of a symbol-length ordered library:
    the largest complete library among them gets POT weights, the rest zero.
    """
    if not 1 <= count <= len(cycles):
        raise PreconditionError(f"cannot take {count} of {len(cycles)} cycles")
    length, size = 0, 0
    for l, total in enumerate(complete_library_sizes(max(2, int(cycles.lengths.max()))), start=2):
        if total > count:
            break
        if np.all(cycles.lengths[:total] <= l):
            length, size = l, total
    if size == 0:
        raise PreconditionError("the first cycles do not contain a complete library")
    w = np.zeros(count)
    w[:size] = pot_weights(cycles.head(size), length, exact=exact).w
    return WeightVector(w, "pot", ids=list(cycles.ids[:count]))
