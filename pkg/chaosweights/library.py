"""
Libraries of periodic orbits: completeness by symbol length, the search that
builds them, and the ``ORBITLIB`` text format.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .dynamics import Params, Trajectory, attractor_point, integrate
from .errors import (
    ChaosWeightsError,
    FileFormatError,
    IncompleteLibraryError,
    PreconditionError,
)
from .orbits import (
    ORBIT_SAMPLE_SPACING,
    PeriodicOrbit,
    RecurrenceGuess,
    refine_orbit,
    scan_recurrences,
    z_maxima,
)
from .symbols import canonical, complete_library_sizes, words_up_to
from .utils import (
    format_float,
    format_floats,
    parse_float,
    parse_int,
    parse_key_values,
    read_header,
    seed_stream,
)

__all__ = [
    "OrbitLibrary",
    "SearchBudget",
    "build_complete_library",
    "complete_library_sizes",
    "complete_length",
    "save_library",
    "load_library",
]

logger = logging.getLogger(__name__)

MAGIC = "ORBITLIB"
VERSION = "v1"


@dataclass
class OrbitLibrary:
    """
    Ordered collection of prime periodic orbits.

    :param ordering: ``"length"`` for the symbol-length ordering, ``"r<k>"``
        for the k-th seeded permutation.
    """

    orbits: list[PeriodicOrbit] = field(default_factory=list)
    ordering: str = "length"

    def __post_init__(self) -> None:
        ids = [o.id for o in self.orbits]
        if len(set(ids)) != len(ids):
            raise PreconditionError("orbit ids must be unique")
        words = [canonical(o.symbol) for o in self.orbits]
        if len(set(words)) != len(words):
            raise PreconditionError("orbit symbols must be unique up to rotation")

    def __len__(self) -> int:
        return len(self.orbits)

    def __iter__(self) -> Iterator[PeriodicOrbit]:
        return iter(self.orbits)

    def __getitem__(self, index: int) -> PeriodicOrbit:
        return self.orbits[index]

    @property
    def words(self) -> list[str]:
        return [o.symbol for o in self.orbits]

    def by_word(self, word: str) -> PeriodicOrbit:
        word = canonical(word)
        for o in self.orbits:
            if o.symbol == word:
                return o
        raise KeyError(word)

    def sorted_by_length(self) -> OrbitLibrary:
        return OrbitLibrary(
            sorted(self.orbits, key=lambda o: (len(o.symbol), o.symbol)), "length"
        )

    def reordered(self, order: Sequence[int], tag: str) -> OrbitLibrary:
        return OrbitLibrary([self.orbits[i] for i in order], tag)

    def prefix(self, count: int) -> OrbitLibrary:
        if not 1 <= count <= len(self):
            raise PreconditionError(f"cannot take {count} of {len(self)} orbits")
        return OrbitLibrary(self.orbits[:count], self.ordering)

    def is_complete(self, l_max: int) -> bool:
        "Whether the library holds exactly the prime words of length 2..l_max."
        return sorted(self.words) == sorted(words_up_to(l_max))


def complete_length(words: Sequence[str]) -> int | None:
    """
    Symbol length ``L`` for which ``words`` is exactly the complete set of
    prime words of length 2..L, or ``None``.
    """
    if not words:
        return None
    longest = max(len(w) for w in words)
    if longest < 2:
        return None
    if sorted(canonical(w) for w in words) == sorted(words_up_to(longest)):
        return longest
    return None


@dataclass
class SearchBudget:
    """
    Limits for :func:`build_complete_library`.

    :param max_runs: Number of independent chaotic runs that seed guesses.
    :param run_duration: Length of every run, after the transient.
    :param max_refinements: Total Newton refinements allowed.
    :param attempts_per_word: Guesses tried per missing word and run.
    :param jobs: Worker processes for refinement.
    """

    max_runs: int = 8
    run_duration: float = 2000.0
    max_refinements: int = 4000
    attempts_per_word: int = 3
    seed: int = 0
    jobs: int = 1


def _itinerary_guesses(
    traj: Trajectory, missing: set[str], attempts: int
) -> list[tuple[str, RecurrenceGuess]]:
    """
    For every missing word, the run segments whose itinerary at successive
    z-maxima spells a rotation of the word, followed by the start of the next
    repetition. Segments are ranked by how close they come to closing.
    """
    idx = z_maxima(traj.states, cyclic=False)
    if len(idx) < 3:
        return []
    itinerary = "".join("A" if x > 0 else "B" for x in traj.states[idx, 0])

    guesses = []
    for word in sorted(missing, key=lambda w: (len(w), w)):
        n = len(word)
        tail = max(2, min(n, 4))
        candidates = []
        for shift in range(n):
            rotation = word[shift:] + word[:shift]
            pattern = rotation + rotation[:tail]
            start = itinerary.find(pattern)
            while start != -1 and start + n < len(idx):
                i, j = idx[start], idx[start + n]
                gap = float(np.linalg.norm(traj.states[j] - traj.states[i]))
                candidates.append((gap, int(i), int(j)))
                start = itinerary.find(pattern, start + 1)
        candidates.sort()
        for gap, i, j in candidates[:attempts]:
            guesses.append(
                (
                    word,
                    RecurrenceGuess(
                        state=traj.states[i].copy(),
                        period=(j - i) * traj.dt,
                        distance=gap,
                        time=traj.t0 + i * traj.dt,
                    ),
                )
            )
    return guesses


def _try_refine(args: tuple[RecurrenceGuess, Params]) -> PeriodicOrbit | None:
    guess, p = args
    try:
        return refine_orbit(guess, p)
    except ChaosWeightsError as e:
        logger.debug("guess T=%.4f rejected: %s", guess.period, e)
        return None


def _refine_all(
    guesses: list[RecurrenceGuess], p: Params, jobs: int
) -> list[PeriodicOrbit | None]:
    tasks = [(g, p) for g in guesses]
    if jobs <= 1 or len(tasks) < 2:
        return [_try_refine(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(_try_refine, tasks))


def build_complete_library(
    l_max: int, p: Params, budget: SearchBudget | None = None
) -> OrbitLibrary:
    """
    Find every prime orbit with symbol length 2..``l_max``.

    Guesses come from long chaotic runs: segments whose itinerary repeats a
    missing word, then near-recurrences of the run. Every asymmetric orbit
    found also supplies its mirror image.

    :raises IncompleteLibraryError: when the budget runs out; ``missing``
        lists the words not found.
    """
    if l_max < 2:
        raise PreconditionError("l_max must be at least 2")
    budget = budget or SearchBudget()

    targets = set(words_up_to(l_max))
    found: dict[str, PeriodicOrbit] = {}
    refinements = 0
    t_max = 0.85 * l_max + 0.6

    def accept(orbit: PeriodicOrbit | None) -> None:
        if orbit is None or orbit.symbol not in targets or orbit.symbol in found:
            return
        found[orbit.symbol] = orbit
        partner = orbit.mirrored()
        if partner.symbol not in found:
            found[partner.symbol] = partner

    for run in range(budget.max_runs):
        if len(found) == len(targets) or refinements >= budget.max_refinements:
            break
        rng = seed_stream(budget.seed, "orbit-search", run)
        traj = integrate(attractor_point(p, rng), p, budget.run_duration, ORBIT_SAMPLE_SPACING)

        missing = targets - found.keys()
        targeted = _itinerary_guesses(traj, missing, budget.attempts_per_word)
        targeted = targeted[: budget.max_refinements - refinements]
        refinements += len(targeted)
        for orbit in _refine_all([g for _, g in targeted], p, budget.jobs):
            accept(orbit)
        logger.info(
            "search run %d: %d/%d words after %d refinements",
            run,
            len(found),
            len(targets),
            refinements,
        )

        if len(found) == len(targets) or refinements >= budget.max_refinements:
            continue
        recurrences = sorted(
            scan_recurrences(traj, 0.5, 1.0, t_max), key=lambda g: g.distance
        )
        recurrences = recurrences[: budget.max_refinements - refinements]
        refinements += len(recurrences)
        for orbit in _refine_all(recurrences, p, budget.jobs):
            accept(orbit)

    missing = sorted(targets - found.keys(), key=lambda w: (len(w), w))
    if missing:
        raise IncompleteLibraryError(
            f"{len(missing)} of {len(targets)} orbits not found within the search budget",
            missing,
        )
    return OrbitLibrary([found[w] for w in words_up_to(l_max)], "length")


def save_library(lib: OrbitLibrary, path: str) -> None:
    lines = [f"{MAGIC} {VERSION} count={len(lib)}"]
    for orbit in lib:
        lines.append(
            f"# id={orbit.id} T={format_float(orbit.period)} sym={orbit.symbol} "
            f"lam={format_float(orbit.floquet_exponent)} "
            f"mult={format_floats(orbit.multipliers, ',')} n={len(orbit.nodes)}"
        )
        for t, node in zip(orbit.node_times, orbit.nodes):
            lines.append(format_floats([t, *node]))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _parse_orbit_header(line: str, lineno: int) -> dict:
    fields = parse_key_values(line[1:].split(), lineno)
    for key in ("id", "T", "sym", "lam", "mult"):
        if key not in fields:
            raise FileFormatError(f"orbit header lacks {key}=", lineno)
    mult = [parse_float(m, lineno) for m in fields["mult"].split(",")]
    if len(mult) != 3:
        raise FileFormatError("mult= needs three values", lineno)
    return {
        "id": fields["id"],
        "period": parse_float(fields["T"], lineno),
        "symbol": fields["sym"],
        "floquet_exponent": parse_float(fields["lam"], lineno),
        "multipliers": np.array(mult),
        "n_nodes": parse_int(fields["n"], lineno) if "n" in fields else None,
    }


def _check_nodes(fields: dict, data: np.ndarray, lineno: int) -> None:
    """
    Node rows must match ``n=`` when given and sit at the offsets ``k T / m``
    that sampling and Floquet products assume.
    """
    m = len(data)
    expected = fields.pop("n_nodes")
    if expected is not None and expected != m:
        raise FileFormatError(
            f"orbit {fields['id']} declares {expected} nodes, found {m} (truncated file?)", lineno
        )
    offsets = np.arange(m) * (fields["period"] / m)
    if not np.allclose(data[:, 0], offsets, rtol=0.0, atol=1e-9 * max(fields["period"], 1.0)):
        raise FileFormatError(
            f"orbit {fields['id']} nodes are not at uniform offsets T/{m} (truncated file?)",
            lineno,
        )


def load_library(path: str) -> OrbitLibrary:
    """
    Read an ``ORBITLIB v1`` file.

    :raises FileFormatError: with the offending line number.
    """
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise FileFormatError("empty file", 1)
    header = read_header(lines[0], MAGIC, VERSION)
    if "count" not in header:
        raise FileFormatError("header lacks count=", 1)
    try:
        count = int(header["count"])
    except ValueError:
        raise FileFormatError("count= is not an integer", 1)

    records: list[tuple[dict, list[list[float]], int]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("#"):
            records.append((_parse_orbit_header(line, lineno), [], lineno))
            continue
        if not records:
            raise FileFormatError("node line before the first orbit header", lineno)
        values = line.split()
        if len(values) != 4:
            raise FileFormatError(f"expected 't x y z', got {len(values)} fields", lineno)
        records[-1][1].append([parse_float(v, lineno) for v in values])

    orbits = []
    for fields, rows, lineno in records:
        if not rows:
            raise FileFormatError(f"orbit {fields['id']} has no nodes", lineno)
        data = np.array(rows)
        _check_nodes(fields, data, lineno)
        orbits.append(PeriodicOrbit(nodes=data[:, 1:], node_times=data[:, 0], **fields))
    if len(orbits) != count:
        raise FileFormatError(
            f"expected {count} orbits, found {len(orbits)} (truncated file?)", len(lines)
        )
    try:
        return OrbitLibrary(orbits, "length")
    except PreconditionError as e:
        raise FileFormatError(str(e))
