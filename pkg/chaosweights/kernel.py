"""
Gaussian kernel machinery: the measure correlation matrix ``A``, the data
vector ``b`` estimated from a chaotic run, and the choice of the kernel
variance ``theta``.

With the base kernel ``G(x, y) = exp(-|y - x|^2 / 2 theta)``, integrating
the product of two kernels over state space gives the induced kernel
``exp(-|x - x'|^2 / 4 theta)`` (up to the constant ``(pi theta)^(3/2)``).
Both ``A`` and ``b`` are built from the induced kernel.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numba
import numpy as np
import numpy.typing as npt

from .dynamics import State, Trajectory
from .errors import FileFormatError, PreconditionError
from .measures import ReferenceMeasure
from .utils import format_float, format_floats, parse_float, parse_int, read_header

__all__ = [
    "KernelConfig",
    "CorrelationSystem",
    "ThetaScan",
    "gaussian_kernel",
    "correlation_entry",
    "correlation_matrix",
    "kernel_observable",
    "build_system",
    "theta_scan",
    "parse_theta_grid",
    "density",
    "save_system",
    "load_system",
]

logger = logging.getLogger(__name__)

DIMENSION = 3


@dataclass(frozen=True)
class KernelConfig:
    """
    :param theta: Variance of the base Gaussian kernel.
    :param prefactor: Multiply the induced kernel by ``(pi theta)^(3/2)``.
    :param overlap: Replace the kernel by exact point overlap, the
        ``theta -> 0`` limit for measures made of atoms.
    """

    theta: float = 100.0
    prefactor: bool = False
    overlap: bool = False

    def __post_init__(self) -> None:
        if not self.theta > 0:
            raise PreconditionError("theta must be positive")

    @property
    def scale(self) -> float:
        if self.prefactor and not self.overlap:
            return (math.pi * self.theta) ** (DIMENSION / 2)
        return 1.0


def _config(theta: float | KernelConfig) -> KernelConfig:
    return theta if isinstance(theta, KernelConfig) else KernelConfig(float(theta))


@numba.njit(parallel=True, cache=True)
def _kernel_sums(points, weights, targets, inv_scales):
    """
    ``out[n, g] = sum_i weights[i] exp(-|points[i] - targets[n]|^2 inv_scales[g])``.

    Every output entry is summed sequentially over ``i``, so results do not
    depend on the thread count.
    """
    n_targets = targets.shape[0]
    n_scales = inv_scales.shape[0]
    out = np.zeros((n_targets, n_scales))
    for n in numba.prange(n_targets):
        t0 = targets[n, 0]
        t1 = targets[n, 1]
        t2 = targets[n, 2]
        for i in range(points.shape[0]):
            d0 = points[i, 0] - t0
            d1 = points[i, 1] - t1
            d2 = points[i, 2] - t2
            d2sum = d0 * d0 + d1 * d1 + d2 * d2
            for g in range(n_scales):
                out[n, g] += weights[i] * np.exp(-d2sum * inv_scales[g])
    return out


def _overlap_sums(
    points: npt.NDArray[np.float64],
    weights: npt.NDArray[np.float64],
    targets: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    same = np.all(targets[:, None, :] == points[None, :, :], axis=-1)
    return same.astype(np.float64) @ weights


def _induced_values(
    m: ReferenceMeasure, targets: npt.NDArray[np.float64], config: KernelConfig
) -> npt.NDArray[np.float64]:
    targets = np.ascontiguousarray(np.atleast_2d(targets), dtype=np.float64)
    if config.overlap:
        return _overlap_sums(m.points, m.weights, targets)
    inv = np.array([1.0 / (4.0 * config.theta)])
    values = _kernel_sums(np.ascontiguousarray(m.points), m.weights, targets, inv)[:, 0]
    return config.scale * values


def gaussian_kernel(x: State, y: State, theta: float) -> float:
    if not theta > 0:
        raise PreconditionError("theta must be positive")
    d = np.asarray(y, dtype=np.float64) - np.asarray(x, dtype=np.float64)
    return math.exp(-float(d @ d) / (2.0 * theta))


def kernel_observable(
    mp: ReferenceMeasure, x: npt.NDArray[np.float64], theta: float | KernelConfig
) -> npt.NDArray[np.float64] | float:
    """
    The observable ``a_p(x) = E_p[k(., x)]`` tied to a measure. Accepts one
    state or an ``(n, 3)`` array of states.
    """
    config = _config(theta)
    x = np.asarray(x, dtype=np.float64)
    values = _induced_values(mp, x, config)
    return float(values[0]) if x.ndim == 1 else values


def correlation_entry(
    mp: ReferenceMeasure, mq: ReferenceMeasure, theta: float | KernelConfig
) -> float:
    """
    ``K(mu_p, mu_q)``: the induced kernel averaged over both measures.
    """
    config = _config(theta)
    values = _induced_values(mp, mq.points, config)
    return float(np.dot(mq.weights, values) / mq.weights.sum())


def correlation_matrix(
    measures: Sequence[ReferenceMeasure], theta: float | KernelConfig
) -> npt.NDArray[np.float64]:
    """
    Symmetric ``P x P`` matrix of :func:`correlation_entry` values. Only the
    upper triangle is evaluated.
    """
    config = _config(theta)
    size = len(measures)
    a = np.empty((size, size))
    for p in range(size):
        for q in range(p, size):
            a[p, q] = a[q, p] = correlation_entry(measures[p], measures[q], config)
    return a


@dataclass(eq=False)
class CorrelationSystem:
    """
    The linear system ``A w = b`` of the least-squares weighting.

    :param n_samples: Number of chaotic samples behind ``b``.
    :param seed: Chaotic-run seed behind ``b``.
    """

    a: npt.NDArray[np.float64]
    b: npt.NDArray[np.float64]
    theta: float
    n_samples: int
    seed: int
    ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.a.ndim != 2 or self.a.shape[0] != self.a.shape[1]:
            raise PreconditionError("A must be square")
        if self.b.shape != (self.a.shape[0],):
            raise PreconditionError("b must have one entry per row of A")
        if not self.ids:
            self.ids = [str(i + 1) for i in range(self.size)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CorrelationSystem):
            return NotImplemented
        return (
            np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
            and self.theta == other.theta
            and self.n_samples == other.n_samples
            and self.seed == other.seed
            and self.ids == other.ids
        )

    @property
    def size(self) -> int:
        return self.a.shape[0]

    def objective(self, w: npt.NDArray[np.float64]) -> float:
        "``|A w - b|^2``."
        r = self.a @ w - self.b
        return float(r @ r)

    def permuted(self, order: Sequence[int]) -> CorrelationSystem:
        order = np.asarray(order)
        return CorrelationSystem(
            self.a[np.ix_(order, order)],
            self.b[order],
            self.theta,
            self.n_samples,
            self.seed,
            [self.ids[i] for i in order],
        )

    def restricted(self, count: int) -> CorrelationSystem:
        "The system of the first ``count`` measures."
        return CorrelationSystem(
            self.a[:count, :count].copy(),
            self.b[:count].copy(),
            self.theta,
            self.n_samples,
            self.seed,
            self.ids[:count],
        )

    def invariant_violations(self, scale: float = 1.0) -> list[str]:
        """
        Checks symmetry, ``0 < A_pq <= 1``, Cauchy-Schwarz and positive
        semi-definiteness. Returns a description of every failed check.
        """
        a = self.a / scale
        problems = []
        if np.max(np.abs(a - a.T)) > 1e-12:
            problems.append("A is not symmetric")
        if np.any(a < 0) or np.any(a > 1 + 1e-12):
            problems.append("A has entries outside [0, 1]")
        diag = np.sqrt(np.clip(np.diag(a), 0, None))
        if np.any(np.abs(a) > np.outer(diag, diag) + 1e-8):
            problems.append("A violates Cauchy-Schwarz")
        if np.min(np.linalg.eigvalsh(a)) < -1e-8:
            problems.append("A is not positive semi-definite")
        return problems


def build_system(
    measures: Sequence[ReferenceMeasure],
    chaotic: Trajectory,
    theta: float | KernelConfig,
    n_samples: int | None = None,
    *,
    seed: int = 0,
) -> CorrelationSystem:
    """
    Assemble ``A`` from all pairs of measures and ``b_q`` as the mean of
    ``a_q`` over the first ``n_samples`` chaotic samples.
    """
    config = _config(theta)
    if not measures:
        raise PreconditionError("need at least one reference measure")
    n = len(chaotic) if n_samples is None else n_samples
    if not 1 <= n <= len(chaotic):
        raise PreconditionError(
            f"N={n} exceeds the {len(chaotic)} available chaotic samples"
        )
    samples = np.ascontiguousarray(chaotic.states[:n])

    a = correlation_matrix(measures, config)
    b = np.array([np.mean(_induced_values(m, samples, config)) for m in measures])
    logger.info(
        "built %dx%d system at theta=%g from %d chaotic samples",
        len(measures),
        len(measures),
        config.theta,
        n,
    )
    system = CorrelationSystem(a, b, config.theta, n, seed, [m.id for m in measures])
    for problem in system.invariant_violations(config.scale):
        logger.warning("%s", problem)
    return system


class ThetaScan(NamedTuple):
    thetas: npt.NDArray[np.float64]
    to_ones: npt.NDArray[np.float64]
    to_identity: npt.NDArray[np.float64]
    best: float


def theta_scan(
    measures: Sequence[ReferenceMeasure], theta_grid: Sequence[float]
) -> ThetaScan:
    """
    Frobenius distances of ``A(theta)`` to the all-ones matrix and to the
    identity over a grid. ``best`` is the smallest grid value where the two
    distances are closest.
    """
    thetas = np.sort(np.asarray(theta_grid, dtype=np.float64))
    if len(thetas) == 0:
        raise PreconditionError("theta grid is empty")
    if np.any(thetas <= 0):
        raise PreconditionError("theta values must be positive")

    inv = 1.0 / (4.0 * thetas)
    size = len(measures)
    stack = np.empty((len(thetas), size, size))
    for p in range(size):
        mp = measures[p]
        for q in range(p, size):
            mq = measures[q]
            sums = _kernel_sums(
                np.ascontiguousarray(mp.points), mp.weights, np.ascontiguousarray(mq.points), inv
            )
            entry = mq.weights @ sums / mq.weights.sum()
            stack[:, p, q] = stack[:, q, p] = entry

    to_ones = np.linalg.norm(stack - 1.0, axis=(1, 2))
    to_identity = np.linalg.norm(stack - np.eye(size), axis=(1, 2))
    gap = np.abs(to_ones - to_identity)
    best = float(thetas[int(np.argmin(gap))])
    logger.info("theta scan over %d values: crossover near %g", len(thetas), best)
    return ThetaScan(thetas, to_ones, to_identity, best)


def parse_theta_grid(text: str) -> npt.NDArray[np.float64]:
    """
    Parse ``lo:hi:logN`` (N log-spaced values) or ``lo:hi:N`` (linear), or a
    comma separated list.
    """
    try:
        if ":" not in text:
            return np.array([float(v) for v in text.split(",")])
        lo, hi, spec = text.split(":")
        if spec.startswith("log"):
            return np.geomspace(float(lo), float(hi), int(spec[3:]))
        return np.linspace(float(lo), float(hi), int(spec))
    except ValueError:
        raise PreconditionError(f"cannot parse theta grid {text!r}")


def density(
    m: ReferenceMeasure, y: npt.NDArray[np.float64], theta: float
) -> npt.NDArray[np.float64]:
    """
    Smoothed density ``f_p(y) = E_p[G(., y)]`` with the base kernel.
    """
    if not theta > 0:
        raise PreconditionError("theta must be positive")
    y = np.ascontiguousarray(np.atleast_2d(y), dtype=np.float64)
    inv = np.array([1.0 / (2.0 * theta)])
    return _kernel_sums(np.ascontiguousarray(m.points), m.weights, y, inv)[:, 0]


MAGIC = "KSYS"
VERSION = "v1"


def save_system(system: CorrelationSystem, path: str) -> None:
    lines = [
        f"{MAGIC} {VERSION} P={system.size} theta={format_float(system.theta)} "
        f"N={system.n_samples} seed={system.seed} ids={','.join(system.ids)}"
    ]
    lines.extend(format_floats(row) for row in system.a)
    lines.append(format_floats(system.b))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_system(path: str) -> CorrelationSystem:
    with open(path) as f:
        lines = [line for line in f.read().splitlines()]
    if not lines:
        raise FileFormatError("empty file", 1)
    header = read_header(lines[0], MAGIC, VERSION)
    for key in ("P", "theta", "N", "seed"):
        if key not in header:
            raise FileFormatError(f"header lacks {key}=", 1)
    size = parse_int(header["P"], 1)
    ids = header["ids"].split(",") if header.get("ids") else []
    if ids and len(ids) != size:
        raise FileFormatError(f"ids= lists {len(ids)} measures, expected {size}", 1)

    rows = []
    for lineno in range(2, size + 3):
        if lineno > len(lines):
            raise FileFormatError("file ends before A and b are complete", lineno)
        values = lines[lineno - 1].split()
        if len(values) != size:
            raise FileFormatError(f"expected {size} values, got {len(values)}", lineno)
        rows.append([parse_float(v, lineno) for v in values])

    return CorrelationSystem(
        a=np.array(rows[:size]),
        b=np.array(rows[size]),
        theta=parse_float(header["theta"], 1),
        n_samples=parse_int(header["N"], 1),
        seed=parse_int(header["seed"], 1),
        ids=ids,
    )
