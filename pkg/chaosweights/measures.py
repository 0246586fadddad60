"""
Reference measures and time averages.

A reference measure is represented by a finite set of stored points with
quadrature weights that sum to one: an orbit sampled at uniform phase, a
trajectory snippet with trapezoid weights, or a handful of atoms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import numpy.typing as npt

from .dynamics import DEFAULT_ATOL, Params, State, Trajectory, attractor_point, integrate
from .errors import FileFormatError, PreconditionError
from .orbits import ORBIT_SAMPLE_SPACING, PeriodicOrbit, orbit_samples
from .utils import (
    format_float,
    format_floats,
    parse_float,
    parse_key_values,
    periodic_trapezoid_weights,
    read_header,
    seed_stream,
    trapezoid_weights,
    uniform_spacing,
)

__all__ = [
    "Snippet",
    "ReferenceMeasure",
    "MeasureKind",
    "sample_snippets",
    "measure_average",
    "ergodic_average",
    "ergodic_statistics",
    "chaotic_run",
    "orbit_measures",
    "snippet_measures",
    "save_snippets",
    "load_snippets",
    "CHAOTIC_DT",
    "CHAOTIC_RTOL",
]

logger = logging.getLogger(__name__)

#: Spacing of the chaotic samples used for b, Markov weights and the truth.
CHAOTIC_DT = 2.0

#: Chaotic statistics only need the invariant measure, not one accurate path.
CHAOTIC_RTOL = 1e-8

# Evaluates an observable on an (n, 3) array of states.
Evaluator = Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]]

MeasureKind = str  # "orbit", "snippet" or "discrete"


@dataclass(eq=False)
class Snippet:
    """
    A finite piece of a chaotic trajectory. Unlike an orbit it does not close.
    """

    id: str
    states: npt.NDArray[np.float64]
    dt: float
    t0: float = 0.0

    def __post_init__(self) -> None:
        if len(self.states) < 2:
            raise PreconditionError("a snippet needs at least two samples")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Snippet):
            return NotImplemented
        return (
            self.id == other.id
            and self.dt == other.dt
            and self.t0 == other.t0
            and np.array_equal(self.states, other.states)
        )

    @property
    def duration(self) -> float:
        return (len(self.states) - 1) * self.dt

    @property
    def times(self) -> npt.NDArray[np.float64]:
        return self.t0 + self.dt * np.arange(len(self.states))


@dataclass(eq=False)
class ReferenceMeasure:
    """
    A normalized measure given by quadrature ``points`` and ``weights``.

    :param kind: ``"orbit"``, ``"snippet"`` or ``"discrete"`` (point masses
        compared by exact overlap).
    :param duration: Period or snippet length; zero for discrete measures.
    :param floquet_exponent: Only for orbits.
    """

    id: str
    kind: MeasureKind
    points: npt.NDArray[np.float64]
    weights: npt.NDArray[np.float64]
    duration: float = 0.0
    floquet_exponent: float | None = None
    symbol_length: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("orbit", "snippet", "discrete"):
            raise PreconditionError(f"unknown measure kind {self.kind!r}")
        if len(self.points) != len(self.weights) or len(self.points) == 0:
            raise PreconditionError("measure needs as many weights as points")

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def from_orbit(
        cls, orbit: PeriodicOrbit, p: Params, max_spacing: float = ORBIT_SAMPLE_SPACING
    ) -> ReferenceMeasure:
        points = orbit_samples(orbit, p, max_spacing)
        return cls(
            id=orbit.id,
            kind="orbit",
            points=points,
            weights=periodic_trapezoid_weights(len(points)),
            duration=orbit.period,
            floquet_exponent=orbit.floquet_exponent,
            symbol_length=len(orbit.symbol),
        )

    @classmethod
    def from_snippet(cls, snippet: Snippet) -> ReferenceMeasure:
        return cls(
            id=snippet.id,
            kind="snippet",
            points=snippet.states,
            weights=trapezoid_weights(len(snippet.states)),
            duration=snippet.duration,
        )

    @classmethod
    def point(cls, x: State, id: str = "point") -> ReferenceMeasure:
        "Unit mass at a single state."
        return cls.atoms([x], [1.0], id)

    @classmethod
    def atoms(
        cls, points: Sequence[State], masses: Sequence[float], id: str = "atoms"
    ) -> ReferenceMeasure:
        masses = np.asarray(masses, dtype=np.float64)
        if np.any(masses < 0) or masses.sum() <= 0:
            raise PreconditionError("atom masses must be non-negative and not all zero")
        return cls(
            id=id,
            kind="discrete",
            points=np.atleast_2d(np.asarray(points, dtype=np.float64)),
            weights=masses / masses.sum(),
        )


def orbit_measures(
    orbits: Sequence[PeriodicOrbit], p: Params, max_spacing: float = ORBIT_SAMPLE_SPACING
) -> list[ReferenceMeasure]:
    return [ReferenceMeasure.from_orbit(o, p, max_spacing) for o in orbits]


def snippet_measures(snippets: Sequence[Snippet]) -> list[ReferenceMeasure]:
    return [ReferenceMeasure.from_snippet(s) for s in snippets]


def measure_average(m: ReferenceMeasure, a: Evaluator) -> float:
    """
    ``E_p[a]``: the quadrature of ``a`` against the measure.
    """
    values = np.asarray(a(m.points), dtype=np.float64)
    # Identical reductions, so E_p[1] == 1 exactly.
    return float(np.dot(m.weights, values) / np.dot(m.weights, np.ones_like(values)))


def ergodic_average(traj: Trajectory, a: Evaluator, n: int | None = None) -> float:
    """
    Mean of ``a`` over the first ``n`` samples (all by default).
    """
    states = traj.states if n is None else traj.states[:n]
    if len(states) == 0:
        raise PreconditionError("no samples to average")
    return float(np.mean(a(states)))


def ergodic_statistics(
    traj: Trajectory, a: Evaluator, n: int | None = None
) -> tuple[float, float, float]:
    """
    Mean, variance and standard error of the mean of ``a``. Samples at the
    chaotic spacing are treated as independent.
    """
    states = traj.states if n is None else traj.states[:n]
    values = np.asarray(a(states), dtype=np.float64)
    mean = float(values.mean())
    var = float(values.var(ddof=1)) if len(values) > 1 else 0.0
    return mean, var, float(np.sqrt(var / len(values)))


def chaotic_run(
    p: Params,
    n_samples: int,
    seed: int,
    *,
    index: int = 0,
    dt: float = CHAOTIC_DT,
    stream: str = "chaotic",
    rtol: float = CHAOTIC_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Trajectory:
    """
    ``n_samples`` states ``x(k dt)``, ``k = 1..n_samples``, of a trajectory
    started on the attractor after the transient. Runs differ by the
    named ``stream`` and ``index`` under one master ``seed``.
    """
    if n_samples < 1:
        raise PreconditionError("n_samples must be >= 1")
    rng = seed_stream(seed, stream, index)
    x0 = attractor_point(p, rng, rtol=rtol, atol=atol)
    traj = integrate(x0, p, n_samples * dt, dt, rtol=rtol, atol=atol)
    return Trajectory(traj.states[1 : n_samples + 1], dt, t0=dt)


def sample_snippets(
    p: Params,
    total_duration: float,
    count: int,
    seed: int,
    *,
    max_spacing: float = ORBIT_SAMPLE_SPACING,
) -> list[Snippet]:
    """
    Cut one chaotic run of ``total_duration`` into ``count`` contiguous
    snippets of equal duration. Neighbours share their boundary sample.
    """
    if not total_duration > 0 or count < 1:
        raise PreconditionError("need total_duration > 0 and count >= 1")
    per_snippet, dt = uniform_spacing(total_duration / count, max_spacing)
    rng = seed_stream(seed, "snippets")
    x0 = attractor_point(p, rng)
    traj = integrate(x0, p, per_snippet * count * dt, dt)
    snippets = [
        Snippet(
            id=f"S{k + 1}",
            states=traj.states[k * per_snippet : (k + 1) * per_snippet + 1].copy(),
            dt=dt,
            t0=k * per_snippet * dt,
        )
        for k in range(count)
    ]
    logger.info(
        "cut %d snippets of %g time units (%d samples each)",
        count,
        per_snippet * dt,
        per_snippet + 1,
    )
    return snippets


SNIP_MAGIC = "SNIPLIB"
SNIP_VERSION = "v1"


def save_snippets(snippets: Sequence[Snippet], path: str) -> None:
    lines = [f"{SNIP_MAGIC} {SNIP_VERSION} count={len(snippets)}"]
    for s in snippets:
        lines.append(
            f"# id={s.id} T={format_float(s.duration)} dt={format_float(s.dt)} "
            f"t0={format_float(s.t0)}"
        )
        for t, x in zip(s.times, s.states):
            lines.append(format_floats([t, *x]))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_snippets(path: str) -> list[Snippet]:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise FileFormatError("empty file", 1)
    header = read_header(lines[0], SNIP_MAGIC, SNIP_VERSION)
    count = header.get("count")

    records: list[tuple[dict[str, str], list[list[float]], int]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("#"):
            fields = parse_key_values(line[1:].split(), lineno)
            for key in ("id", "T", "dt"):
                if key not in fields:
                    raise FileFormatError(f"snippet header lacks {key}=", lineno)
            records.append((fields, [], lineno))
            continue
        if not records:
            raise FileFormatError("sample line before the first snippet header", lineno)
        values = line.split()
        if len(values) != 4:
            raise FileFormatError(f"expected 't x y z', got {len(values)} fields", lineno)
        records[-1][1].append([parse_float(v, lineno) for v in values])

    snippets = []
    for fields, rows, lineno in records:
        if len(rows) < 2:
            raise FileFormatError(f"snippet {fields['id']} has fewer than two samples", lineno)
        duration = parse_float(fields["T"], lineno)
        dt = parse_float(fields["dt"], lineno)
        if dt <= 0 or round(duration / dt) != len(rows) - 1:
            raise FileFormatError(
                f"snippet {fields['id']} has {len(rows)} samples, T=/dt= need "
                f"{round(duration / dt) + 1 if dt > 0 else '?'} (truncated file?)",
                lineno,
            )
        data = np.array(rows)
        snippets.append(
            Snippet(
                id=fields["id"],
                states=data[:, 1:].copy(),
                dt=dt,
                t0=parse_float(fields.get("t0", "0"), lineno),
            )
        )
    if count is not None and str(len(snippets)) != count:
        raise FileFormatError(
            f"expected {count} snippets, found {len(snippets)} (truncated file?)", len(lines)
        )
    return snippets
