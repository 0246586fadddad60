"""
Unstable periodic orbits: recurrence search, multiple-shooting refinement,
Floquet multipliers and symbolic coding.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numba
import numpy as np
import numpy.typing as npt

from .dynamics import (
    Params,
    State,
    Trajectory,
    flow,
    get_system,
    integrate,
    integrate_with_tangent,
    mirror,
)
from .errors import (
    AmbiguousSymbolError,
    ConvergenceError,
    DegenerateSolutionError,
    PreconditionError,
    RefinementError,
)
from .symbols import canonical_primitive, mirror_word
from .utils import uniform_spacing

__all__ = [
    "PeriodicOrbit",
    "RecurrenceGuess",
    "scan_recurrences",
    "refine_orbit",
    "floquet",
    "symbol_sequence",
    "z_maxima",
    "orbit_samples",
    "ORBIT_SAMPLE_SPACING",
]

logger = logging.getLogger(__name__)

# Orbits are sampled for quadrature and symbol detection at this spacing or
# finer.
ORBIT_SAMPLE_SPACING = 0.01

# |f(x)| below this along an orbit means we are sitting on an equilibrium.
EQUILIBRIUM_SPEED = 1e-6

# |x| below this at a z-maximum cannot be assigned to a lobe.
AMBIGUOUS_X = 1e-6


@dataclass(eq=False)
class PeriodicOrbit:
    """
    A prime periodic orbit stored as multiple-shooting nodes.

    :param nodes: ``(m, 3)`` states on the orbit.
    :param node_times: Time offset of every node from ``nodes[0]``.
    :param period: Prime period ``T_p``.
    :param symbol: Canonical (cyclically minimal) primitive word.
    :param floquet_exponent: ``ln|Lambda_max| / T_p``.
    :param multipliers: Monodromy eigenvalue magnitudes, descending.
    """

    id: str
    nodes: npt.NDArray[np.float64]
    node_times: npt.NDArray[np.float64]
    period: float
    symbol: str
    floquet_exponent: float
    multipliers: npt.NDArray[np.float64]
    _samples: dict = field(default_factory=dict, repr=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PeriodicOrbit):
            return NotImplemented
        return (
            self.id == other.id
            and self.symbol == other.symbol
            and self.period == other.period
            and self.floquet_exponent == other.floquet_exponent
            and np.array_equal(self.multipliers, other.multipliers)
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.node_times, other.node_times)
        )

    @property
    def symbol_length(self) -> int:
        return len(self.symbol)

    @property
    def is_symmetric(self) -> bool:
        "Whether the orbit is its own mirror image."
        return mirror_word(self.symbol) == self.symbol

    def mirrored(self) -> PeriodicOrbit:
        """
        The symmetric partner under ``(x, y, z) -> (-x, -y, z)``. Periods and
        multipliers are shared.
        """
        word = mirror_word(self.symbol)
        return PeriodicOrbit(
            id=word,
            nodes=mirror(self.nodes),
            node_times=self.node_times.copy(),
            period=self.period,
            symbol=word,
            floquet_exponent=self.floquet_exponent,
            multipliers=self.multipliers.copy(),
        )

    def closure_residual(self, p: Params) -> float:
        """
        Single-shooting closure ``|Phi_T(x_0) - x_0|``.
        """
        return float(np.linalg.norm(flow(self.nodes[0], p, self.period) - self.nodes[0]))


class RecurrenceGuess(NamedTuple):
    state: State
    period: float
    distance: float
    time: float


@numba.njit(cache=True)
def _recurrence_events(states, k_min, k_max, eps):
    """
    All (i, k, d) with |x[i+k] - x[i]| = d < eps and d a local minimum in
    the lag k.
    """
    n = states.shape[0]
    events = []
    eps2 = eps * eps
    for i in range(n - k_max - 1):
        xi0 = states[i, 0]
        xi1 = states[i, 1]
        xi2 = states[i, 2]
        k = k_min - 1
        a = states[i + k, 0] - xi0
        b = states[i + k, 1] - xi1
        c = states[i + k, 2] - xi2
        cur = a * a + b * b + c * c
        for k in range(k_min, k_max + 1):
            a = states[i + k + 1, 0] - xi0
            b = states[i + k + 1, 1] - xi1
            c = states[i + k + 1, 2] - xi2
            nxt = a * a + b * b + c * c
            prev_k = cur
            a = states[i + k, 0] - xi0
            b = states[i + k, 1] - xi1
            c = states[i + k, 2] - xi2
            cur = a * a + b * b + c * c
            if cur < eps2 and cur < prev_k and cur <= nxt:
                events.append((i, k, np.sqrt(cur)))
    return events


def scan_recurrences(
    traj: Trajectory, eps: float, t_min: float, t_max: float
) -> list[RecurrenceGuess]:
    """
    Near-recurrences ``|x(t+T) - x(t)| < eps`` with ``t_min <= T <= t_max``,
    locally minimal in ``T``. Events that overlap in time with a better
    event of similar period are dropped.
    """
    if t_max < t_min:
        raise PreconditionError("t_max must not be smaller than t_min")
    if traj.duration <= t_max:
        raise PreconditionError("trajectory must be longer than t_max")

    k_min = max(2, int(math.ceil(t_min / traj.dt)))
    k_max = int(math.floor(t_max / traj.dt))
    if k_max + 2 > len(traj):
        k_max = len(traj) - 2
    if k_max < k_min:
        return []

    events = _recurrence_events(np.ascontiguousarray(traj.states), k_min, k_max, eps)
    events = sorted(events, key=lambda e: (e[2], e[0], e[1]))

    accepted: list[tuple[int, int, float]] = []
    for i, k, d in events:
        if any(
            abs(i - i2) < k2 and abs(k - k2) <= 0.1 * k2 for i2, k2, _ in accepted
        ):
            continue
        accepted.append((i, k, d))

    accepted.sort(key=lambda e: e[0])
    guesses = [
        RecurrenceGuess(
            state=traj.states[i].copy(),
            period=k * traj.dt,
            distance=float(d),
            time=traj.t0 + i * traj.dt,
        )
        for i, k, d in accepted
    ]
    logger.debug(
        "%d recurrence events, %d after de-duplication", len(events), len(guesses)
    )
    return guesses


def z_maxima(states: npt.NDArray[np.float64], cyclic: bool) -> npt.NDArray[np.intp]:
    """
    Indices of local maxima of ``z``.
    """
    z = states[:, 2]
    if cyclic:
        before = np.roll(z, 1)
        after = np.roll(z, -1)
        return np.flatnonzero((z > before) & (z >= after))
    inner = (z[1:-1] > z[:-2]) & (z[1:-1] >= z[2:])
    return np.flatnonzero(inner) + 1


def _itinerary(states: npt.NDArray[np.float64], cyclic: bool) -> str:
    idx = z_maxima(states, cyclic)
    x = states[idx, 0]
    if np.any(np.abs(x) < AMBIGUOUS_X):
        raise AmbiguousSymbolError("z-maximum on the symmetry axis x = 0")
    return "".join("A" if xi > 0 else "B" for xi in x)


def _segment_samples(
    nodes: npt.NDArray[np.float64], period: float, p: Params, max_spacing: float
) -> npt.NDArray[np.float64]:
    """
    ``n`` samples at uniform phases ``k T / n``, integrated node by node.
    """
    m = len(nodes)
    per_segment, dt = uniform_spacing(period / m, max_spacing)
    parts = []
    for i in range(m):
        seg = integrate(nodes[i], p, per_segment * dt, dt)
        parts.append(seg.states[:per_segment])
    return np.concatenate(parts)


def orbit_samples(
    orbit: PeriodicOrbit, p: Params, max_spacing: float = ORBIT_SAMPLE_SPACING
) -> npt.NDArray[np.float64]:
    """
    Distinct samples of one period at uniform phase, spacing <= ``max_spacing``.
    Cached on the orbit.
    """
    key = (p, max_spacing)
    if key not in orbit._samples:
        orbit._samples[key] = _segment_samples(orbit.nodes, orbit.period, p, max_spacing)
    return orbit._samples[key]


def symbol_sequence(orbit: PeriodicOrbit, p: Params) -> str:
    """
    Canonical word of an orbit: one letter per maximum of ``z`` over one
    period, ``A`` when ``x > 0`` there and ``B`` when ``x < 0``.
    """
    word = _itinerary(orbit_samples(orbit, p), cyclic=True)
    if not word:
        raise AmbiguousSymbolError("no maximum of z along the orbit")
    return canonical_primitive(word)


def _segment_monodromies(
    nodes: npt.NDArray[np.float64], tau: float, p: Params
) -> list[npt.NDArray[np.float64]]:
    return [integrate_with_tangent(x, p, tau).deviation for x in nodes]


def floquet(orbit: PeriodicOrbit, p: Params) -> tuple[float, npt.NDArray[np.float64]]:
    """
    Leading Floquet exponent and the monodromy eigenvalue magnitudes.

    The product of segment matrices spans many orders of magnitude, so the
    smallest multiplier is recovered from the determinant, which is the sum of
    well-conditioned per-segment log-determinants.
    """
    tau = orbit.period / len(orbit.nodes)
    monodromy = np.eye(3)
    log_det = 0.0
    for m in _segment_monodromies(orbit.nodes, tau, p):
        monodromy = m @ monodromy
        log_det += np.linalg.slogdet(m)[1]
    try:
        eigenvalues = np.linalg.eigvals(monodromy)
    except np.linalg.LinAlgError as e:
        raise ConvergenceError(f"monodromy eigenvalues failed: {e}")
    magnitudes = np.sort(np.abs(eigenvalues))[::-1]
    if magnitudes[0] <= 0 or magnitudes[1] <= 0:
        raise ConvergenceError("vanishing monodromy eigenvalue")
    magnitudes[2] = math.exp(log_det - math.log(magnitudes[0]) - math.log(magnitudes[1]))
    return math.log(magnitudes[0]) / orbit.period, magnitudes


def _shooting_residual(
    nodes: npt.NDArray[np.float64], period: float, p: Params
) -> npt.NDArray[np.float64]:
    m = len(nodes)
    tau = period / m
    return np.concatenate(
        [flow(nodes[i], p, tau) - nodes[(i + 1) % m] for i in range(m)]
    )


def _check_not_equilibrium(nodes: npt.NDArray[np.float64], p: Params) -> None:
    system = get_system(p)
    speed = min(np.linalg.norm(system.vector_field(x)) for x in nodes)
    if speed < EQUILIBRIUM_SPEED:
        raise DegenerateSolutionError(
            f"guess collapses onto an equilibrium (|f| = {speed:.2e})"
        )


def _count_z_maxima(state: State, period: float, p: Params) -> int:
    n, dt = uniform_spacing(period, ORBIT_SAMPLE_SPACING)
    traj = integrate(state, p, n * dt, dt)
    return len(z_maxima(traj.states[:-1], cyclic=True))


def refine_orbit(
    guess: tuple[State, float] | RecurrenceGuess,
    p: Params,
    *,
    n_nodes: int | None = None,
    max_iter: int = 40,
    tol: float = 1e-10,
) -> PeriodicOrbit:
    """
    Converge a (state, period) guess to a periodic orbit by multiple
    shooting with the period as an unknown.

    The Newton system is closed by the phase condition
    ``f(x_0) . dx_0 = 0``. Steps are damped by halving (at most 10 times)
    until the residual decreases.

    :param n_nodes: Number of shooting nodes; ``max(8, 4 * winding count)``
        of the guess by default.
    """
    state, period = np.asarray(guess[0], dtype=np.float64), float(guess[1])
    if not period > 0:
        raise PreconditionError("guess period must be positive")

    system = get_system(p)
    _check_not_equilibrium(state[None, :], p)

    if n_nodes is None:
        n_nodes = max(8, 4 * _count_z_maxima(state, period, p))
    m = n_nodes
    nodes = integrate(state, p, period, period / m).states[:m].copy()
    _check_not_equilibrium(nodes, p)

    residual = _shooting_residual(nodes, period, p)
    norm = np.max(np.abs(residual))
    for iteration in range(max_iter):
        if norm < tol:
            break

        tau = period / m
        size = 3 * m + 1
        jac = np.zeros((size, size))
        for i in range(m):
            bundle = integrate_with_tangent(nodes[i], p, tau)
            rows = slice(3 * i, 3 * i + 3)
            jac[rows, 3 * i : 3 * i + 3] = bundle.deviation
            j = (i + 1) % m
            jac[rows, 3 * j : 3 * j + 3] -= np.eye(3)
            jac[rows, -1] = system.vector_field(bundle.state) / m
        jac[-1, 0:3] = system.vector_field(nodes[0])

        rhs = -np.concatenate([residual, [0.0]])
        try:
            delta = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(jac, rhs, rcond=None)[0]

        step = 1.0
        for _ in range(11):
            trial_nodes = nodes + step * delta[:-1].reshape(m, 3)
            trial_period = period + step * delta[-1]
            if trial_period > 0:
                trial_residual = _shooting_residual(trial_nodes, trial_period, p)
                trial_norm = np.max(np.abs(trial_residual))
                if trial_norm < norm:
                    break
            step *= 0.5
        else:
            if norm < 100 * tol:
                # Stagnation at the integrator's noise floor.
                break
            raise RefinementError(
                f"line search failed at iteration {iteration} (residual {norm:.2e})"
            )

        nodes, period, residual, norm = trial_nodes, trial_period, trial_residual, trial_norm
        logger.debug(
            "shooting iteration %d: residual %.3e, period %.10f", iteration, norm, period
        )
    else:
        if norm >= 100 * tol:
            raise RefinementError(
                f"no convergence after {max_iter} iterations (residual {norm:.2e})"
            )

    _check_not_equilibrium(nodes, p)

    orbit = PeriodicOrbit(
        id="",
        nodes=nodes,
        node_times=np.arange(m) * (period / m),
        period=period,
        symbol="",
        floquet_exponent=0.0,
        multipliers=np.zeros(3),
    )
    orbit.symbol = orbit.id = symbol_sequence(orbit, p)
    orbit.floquet_exponent, orbit.multipliers = floquet(orbit, p)
    if not orbit.floquet_exponent > 0:
        raise RefinementError(f"orbit {orbit.symbol} is not unstable")
    logger.info(
        "refined orbit %s: T=%.10f lambda=%.6f residual=%.2e",
        orbit.symbol,
        orbit.period,
        orbit.floquet_exponent,
        norm,
    )
    return orbit
