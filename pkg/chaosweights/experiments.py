"""
Accuracy experiments: ground truth from long chaotic runs, relative errors,
and sweeps over library size ``P``, ordering ``r``, chaotic seed ``s`` and
sample count ``N``.

A sweep writes three files next to its result table ``out.csv``:
``out.truth.csv`` (reference averages), ``out.rows.partial`` (rows of the
finished seeds) and ``out.done`` (completion and skip log). Rerunning a sweep
skips finished seeds and rewrites ``out.csv`` byte for byte.
"""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
import numpy.typing as npt
from scipy.spatial import cKDTree

from .dynamics import Params, Trajectory, lyapunov_benettin
from .errors import ChaosWeightsError, FileFormatError, PreconditionError
from .kernel import CorrelationSystem, KernelConfig, ThetaScan, correlation_matrix, kernel_observable
from .library import OrbitLibrary, complete_length
from .measures import (
    CHAOTIC_DT,
    CHAOTIC_RTOL,
    ReferenceMeasure,
    Snippet,
    chaotic_run,
    measure_average,
    orbit_measures,
    snippet_measures,
)
from .observables import BASIS_TAGS, LYAPUNOV_TAG, basis
from .pot import CycleData, pot_weights, pot_weights_prefix
from .symbols import complete_library_sizes
from .utils import format_float, seed_stream
from .weights import (
    WeightVector,
    markov_weights,
    solve_constrained,
    solve_nnls_normalized,
    solve_pseudoinverse,
    solve_tikhonov,
    uniform_weights,
)

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "SummaryRow",
    "Truth",
    "SweepResult",
    "LambdaFit",
    "reference_truth",
    "relative_error",
    "max_error",
    "permutation_order",
    "permuted_library",
    "run_sweep",
    "summarize",
    "weight_lambda_fit",
    "weight_distribution",
    "write_results",
    "read_results",
    "write_summary",
    "read_summary",
    "write_truth",
    "read_truth",
    "write_theta_scan",
    "read_theta_scan",
    "SWEEP_METHODS",
    "NOT_COMPLETE",
    "EMAX_TAG",
]

logger = logging.getLogger(__name__)

SWEEP_METHODS = ("lsw", "nnls", "constrained", "pinv", "markov", "uniform", "pot")
DEFAULT_METHODS = ("lsw", "nnls", "markov", "uniform", "pot")
KINDS = ("orbit", "snippet")

NOT_COMPLETE = "not a complete library size"

#: Observable tag of the per-cell maximum over the basis in summaries.
EMAX_TAG = "Emax"

RESULT_HEADER = ["method", "kind", "P", "r", "s", "N", "observable", "E_true", "E_hat", "E_rel"]
SUMMARY_HEADER = ["method", "kind", "P", "N", "observable", "median_Erel", "q25", "q75"]
TRUTH_HEADER = ["observable", "E_true", "var", "stderr"]
THETA_SCAN_HEADER = ["theta", "to_ones", "to_identity"]


@dataclass
class ExperimentConfig:
    """
    One sweep.

    :param sizes: Library sizes ``P``; the complete-library sizes that fit
        the library by default.
    :param permutations: ``R``; ``r = 1`` is the symbol-length ordering.
    :param seeds: ``S`` independent chaotic runs behind ``b`` and Markov.
    :param sample_counts: ``N`` values, non-decreasing.
    :param truth_samples: Samples per truth run; ``max(sample_counts)`` by
        default.
    """

    methods: tuple[str, ...] = DEFAULT_METHODS
    kinds: tuple[str, ...] = ("orbit",)
    sizes: tuple[int, ...] = ()
    permutations: int = 32
    seeds: int = 16
    sample_counts: tuple[int, ...] = (100, 1_000, 10_000, 100_000)
    dt: float = CHAOTIC_DT
    theta: float = 100.0
    alpha: float = 1e-10
    library_path: str = "library.txt"
    snippet_path: str | None = None
    output_path: str = "results.csv"
    master_seed: int = 0
    params: Params = field(default_factory=Params)
    chaotic_rtol: float = CHAOTIC_RTOL
    lyapunov_time: float = 1e4
    truth_samples: int | None = None
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.permutations < 1 or self.seeds < 1:
            raise PreconditionError("R and S must be at least 1")
        if not self.sample_counts or list(self.sample_counts) != sorted(self.sample_counts):
            raise PreconditionError("N values must be a non-empty non-decreasing list")
        if self.sample_counts[0] < 1:
            raise PreconditionError("N values must be positive")
        unknown = set(self.methods) - set(SWEEP_METHODS)
        if unknown:
            raise PreconditionError(f"unknown methods: {', '.join(sorted(unknown))}")
        if set(self.kinds) - set(KINDS):
            raise PreconditionError(f"kinds must be among {', '.join(KINDS)}")
        if "snippet" in self.kinds and not self.snippet_path:
            raise PreconditionError("snippet references need a snippet file")

    @property
    def max_samples(self) -> int:
        return int(self.sample_counts[-1])


class ResultRow(NamedTuple):
    method: str
    kind: str
    P: int
    r: int
    s: int
    N: int
    observable: str
    E_true: float
    E_hat: float
    E_rel: float


class SummaryRow(NamedTuple):
    method: str
    kind: str
    P: int
    N: int
    observable: str
    median_Erel: float
    q25: float
    q75: float


@dataclass
class Truth:
    """
    Reference averages pooled over independent long runs.
    """

    means: dict[str, float]
    variances: dict[str, float]
    stderrs: dict[str, float]

    def variance(self, tag: str) -> float:
        var = self.variances[tag]
        # A constant observable has zero variance; its errors are absolute.
        return var if var > 0 else 1.0


def relative_error(e_true: float, e_hat: float, var: float) -> float:
    """
    ``|E_true - E_hat| / sqrt(var)``; ``var = 0`` means ``var = 1``.
    """
    if var < 0:
        raise PreconditionError("variance must be non-negative")
    if var == 0:
        var = 1.0
    return abs(e_true - e_hat) / float(np.sqrt(var))


def max_error(rows: Sequence[ResultRow]) -> float:
    """
    Maximum relative error over the ten basis observables of one cell.
    """
    by_tag = {row.observable: row.E_rel for row in rows}
    missing = [tag for tag in BASIS_TAGS if tag not in by_tag]
    if missing:
        raise PreconditionError(f"missing observables: {', '.join(missing)}")
    return max(by_tag[tag] for tag in BASIS_TAGS)


def reference_truth(
    p: Params,
    seeds: int,
    n_samples: int,
    dt: float = CHAOTIC_DT,
    master_seed: int = 0,
    *,
    lyapunov_time: float = 1e4,
    rtol: float = CHAOTIC_RTOL,
) -> Truth:
    """
    Pool ``seeds`` runs of ``n_samples`` samples each into means, variances
    and standard errors of every basis observable, and add the Benettin
    exponent under the ``lyapunov`` tag.
    """
    if seeds < 1:
        raise PreconditionError("need at least one seed")
    observables = basis()
    sums = np.zeros(len(observables))
    squares = np.zeros(len(observables))
    for s in range(seeds):
        traj = chaotic_run(p, n_samples, master_seed, index=s, dt=dt, stream="truth-seeds", rtol=rtol)
        for k, a in enumerate(observables):
            values = a(traj.states)
            sums[k] += values.sum()
            squares[k] += (values * values).sum()
        logger.info("truth run %d/%d done", s + 1, seeds)

    total = seeds * n_samples
    means = sums / total
    variances = np.maximum(squares / total - means**2, 0.0) * total / max(total - 1, 1)
    # The constant observable is exact.
    means[0], variances[0] = 1.0, 0.0

    truth = Truth(
        means={a.tag: float(m) for a, m in zip(observables, means)},
        variances={a.tag: float(v) for a, v in zip(observables, variances)},
        stderrs={a.tag: float(np.sqrt(v / total)) for a, v in zip(observables, variances)},
    )
    lam = lyapunov_benettin(p, lyapunov_time, seed=master_seed)[0]
    truth.means[LYAPUNOV_TAG] = lam
    truth.variances[LYAPUNOV_TAG] = 0.0
    truth.stderrs[LYAPUNOV_TAG] = float("nan")
    return truth


def permutation_order(size: int, r: int, master_seed: int) -> npt.NDArray[np.intp]:
    """
    ``r = 1`` is the identity; ``r > 1`` a seeded shuffle.
    """
    if r < 1:
        raise PreconditionError("r must be at least 1")
    if r == 1:
        return np.arange(size)
    return seed_stream(master_seed, "permutations", r).permutation(size)


def permuted_library(library: OrbitLibrary, r: int, master_seed: int) -> OrbitLibrary:
    ordered = library.sorted_by_length()
    if r == 1:
        return ordered
    return ordered.reordered(permutation_order(len(ordered), r, master_seed), f"r{r}")


def _check_permutations(size: int, count: int, master_seed: int) -> None:
    seen = {tuple(permutation_order(size, r, master_seed)) for r in range(1, count + 1)}
    if len(seen) < count:
        logger.warning("%d of %d permutations coincide", count - len(seen), count)


@dataclass
class _KindData:
    kind: str
    measures: list[ReferenceMeasure]
    a_full: npt.NDArray[np.float64]
    averages: npt.NDArray[np.float64]
    exponents: list[float | None]


@dataclass
class _SweepContext:
    cfg: ExperimentConfig
    kinds: list[_KindData]
    truth: Truth
    sizes: list[int]
    orders: dict[int, npt.NDArray[np.intp]]
    pot: dict[int, WeightVector]


class SweepResult(NamedTuple):
    rows: list[ResultRow]
    summary: list[SummaryRow]
    skipped: list[str]


def _kind_data(kind: str, measures: list[ReferenceMeasure], theta: float) -> _KindData:
    observables = basis()
    averages = np.array([[measure_average(m, a) for a in observables] for m in measures])
    return _KindData(
        kind=kind,
        measures=measures,
        a_full=correlation_matrix(measures, theta),
        averages=averages,
        exponents=[m.floquet_exponent for m in measures],
    )


def _cell_rows(
    ctx: _SweepContext,
    data: _KindData,
    method: str,
    w: WeightVector,
    idx: npt.NDArray[np.intp],
    P: int,
    r: int,
    s: int,
    N: int,
) -> list[ResultRow]:
    rows = []
    estimates = w.w @ data.averages[idx]
    for k, tag in enumerate(BASIS_TAGS):
        e_true = ctx.truth.means[tag]
        e_hat = float(estimates[k])
        rows.append(
            ResultRow(
                method, data.kind, P, r, s, N, tag, e_true, e_hat,
                relative_error(e_true, e_hat, ctx.truth.variance(tag)),
            )
        )
    if data.kind == "orbit":
        e_true = ctx.truth.means[LYAPUNOV_TAG]
        e_hat = float(w.w @ np.array([data.exponents[i] for i in idx]))
        rows.append(
            ResultRow(method, data.kind, P, r, s, N, LYAPUNOV_TAG, e_true, e_hat, abs(e_true - e_hat))
        )
    return rows


def _solve(method: str, system: CorrelationSystem, alpha: float) -> WeightVector:
    if method == "lsw":
        return solve_tikhonov(system, alpha)
    if method == "nnls":
        return solve_nnls_normalized(system)
    if method == "constrained":
        return solve_constrained(system)
    if method == "pinv":
        return solve_pseudoinverse(system)
    raise PreconditionError(f"{method} is not a least-squares method")


def _run_seed(ctx: _SweepContext, s: int) -> tuple[list[ResultRow], list[str]]:
    """
    Every cell that uses chaotic run ``s``.
    """
    cfg = ctx.cfg
    counts = list(cfg.sample_counts)
    chaotic = chaotic_run(
        cfg.params, cfg.max_samples, cfg.master_seed, index=s, dt=cfg.dt, rtol=cfg.chaotic_rtol
    )
    config = KernelConfig(cfg.theta)
    rows: list[ResultRow] = []
    failures: list[str] = []

    for data in ctx.kinds:
        # b for every measure at every N, from prefix sums of a_q over the run.
        b_at = np.empty((len(counts), len(data.measures)))
        for q, m in enumerate(data.measures):
            prefix = np.cumsum(kernel_observable(m, chaotic.states, config))
            b_at[:, q] = [prefix[n - 1] / n for n in counts]

        distances = None
        if "markov" in cfg.methods:
            distances = np.column_stack(
                [cKDTree(m.points).query(chaotic.states)[0] for m in data.measures]
            )

        for r in range(1, cfg.permutations + 1):
            order = ctx.orders[r]
            for P in ctx.sizes:
                idx = order[:P]
                owner = None
                if distances is not None:
                    # argmin keeps the first of equal distances: lowest index wins.
                    owner = np.argmin(distances[:, idx], axis=1)
                for ni, N in enumerate(counts):
                    system = CorrelationSystem(
                        data.a_full[np.ix_(idx, idx)], b_at[ni, idx], cfg.theta, N, s
                    )
                    for method in cfg.methods:
                        try:
                            if method == "uniform":
                                w = uniform_weights(P)
                            elif method == "markov":
                                w = WeightVector(np.bincount(owner[:N], minlength=P) / N, "markov")
                            elif method == "pot":
                                if data.kind != "orbit" or r != 1 or P not in ctx.pot:
                                    continue
                                w = ctx.pot[P]
                            else:
                                w = _solve(method, system, cfg.alpha)
                        except ChaosWeightsError as e:
                            failures.append(
                                f"fail method={method} kind={data.kind} P={P} r={r} s={s} "
                                f"N={N} code={e.code} {e}"
                            )
                            continue
                        rows.extend(_cell_rows(ctx, data, method, w, idx, P, r, s, N))
    logger.info("seed %d: %d rows, %d failed cells", s, len(rows), len(failures))
    return rows, failures


def _run_seed_task(args: tuple[_SweepContext, int]) -> tuple[list[ResultRow], list[str]]:
    return _run_seed(*args)


def _sort_key(cfg: ExperimentConfig) -> Callable[[ResultRow], tuple]:
    tags = list(BASIS_TAGS) + [LYAPUNOV_TAG]

    def key(row: ResultRow) -> tuple:
        return (
            cfg.methods.index(row.method),
            KINDS.index(row.kind),
            row.P,
            row.r,
            row.s,
            row.N,
            tags.index(row.observable),
        )

    return key


def _pot_table(library: OrbitLibrary, sizes: Sequence[int]) -> tuple[dict[int, WeightVector], list[str]]:
    table: dict[int, WeightVector] = {}
    skipped = []
    cycles = CycleData.from_library(library)
    for P in sizes:
        length = complete_length(library.words[:P])
        if length is None:
            skipped.append(f"skip method=pot P={P} reason={NOT_COMPLETE}")
            logger.warning("POT skipped at P=%d: %s", P, NOT_COMPLETE)
            continue
        try:
            table[P] = pot_weights(cycles.head(P), length)
        except ChaosWeightsError as e:
            skipped.append(f"skip method=pot P={P} reason={e.code}: {e}")
    return table, skipped


def _done_seeds(done_path: str) -> set[int]:
    if not os.path.exists(done_path):
        return set()
    seeds = set()
    with open(done_path) as f:
        for line in f:
            if line.startswith("seed="):
                seeds.add(int(line.split()[0].partition("=")[2]))
    return seeds


def run_sweep(
    cfg: ExperimentConfig,
    library: OrbitLibrary,
    snippets: Sequence[Snippet] | None = None,
    *,
    truth: Truth | None = None,
    on_seed_done: Callable[[int], None] | None = None,
) -> SweepResult:
    """
    Evaluate every (method, kind, P, r, s, N) cell and write the result and
    summary tables.

    POT only runs on the symbol-length ordering (``r = 1``) at sizes that
    are complete libraries; other sizes are logged as skipped. Failing cells
    are logged and the sweep continues.
    """
    library = library.sorted_by_length()
    p = cfg.params
    stem = os.path.splitext(cfg.output_path)[0]
    truth_path = stem + ".truth.csv"
    partial_path = cfg.output_path + ".rows.partial"
    done_path = cfg.output_path + ".done"

    sizes = list(cfg.sizes) or [n for n in complete_library_sizes(16) if n <= len(library)]
    if not sizes or max(sizes) > len(library) or min(sizes) < 1:
        raise PreconditionError(f"library sizes must lie in 1..{len(library)}")
    largest = max(sizes)

    if truth is None and os.path.exists(truth_path):
        truth = read_truth(truth_path)
    if truth is None:
        truth = reference_truth(
            p,
            cfg.seeds,
            cfg.truth_samples or cfg.max_samples,
            cfg.dt,
            cfg.master_seed,
            lyapunov_time=cfg.lyapunov_time,
            rtol=cfg.chaotic_rtol,
        )
        write_truth(truth, truth_path)

    kinds = []
    if "orbit" in cfg.kinds:
        kinds.append(_kind_data("orbit", orbit_measures(library.orbits[:largest], p), cfg.theta))
    if "snippet" in cfg.kinds:
        if snippets is None or len(snippets) < largest:
            raise PreconditionError(f"need at least {largest} snippets")
        kinds.append(_kind_data("snippet", snippet_measures(snippets[:largest]), cfg.theta))

    _check_permutations(largest, cfg.permutations, cfg.master_seed)
    orders = {
        r: permutation_order(largest, r, cfg.master_seed) for r in range(1, cfg.permutations + 1)
    }
    pot, skipped = _pot_table(library, sizes) if "pot" in cfg.methods else ({}, [])
    ctx = _SweepContext(cfg, kinds, truth, sizes, orders, pot)

    done = _done_seeds(done_path)
    rows = [row for row in read_results(partial_path) if row.s in done] if done else []
    todo = [s for s in range(cfg.seeds) if s not in done]
    if done:
        logger.info("resuming: %d of %d seeds already done", len(done), cfg.seeds)
    else:
        with open(done_path, "w") as f:
            f.writelines(line + "\n" for line in skipped)
        write_results([], partial_path)

    def record(s: int, seed_rows: list[ResultRow], failures: list[str]) -> None:
        rows.extend(seed_rows)
        _append_rows(seed_rows, partial_path)
        with open(done_path, "a") as f:
            f.writelines(line + "\n" for line in failures)
            f.write(f"seed={s} status=ok\n")
        if on_seed_done:
            on_seed_done(s)

    if cfg.jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as executor:
            for s, (seed_rows, failures) in zip(
                todo, executor.map(_run_seed_task, [(ctx, s) for s in todo])
            ):
                record(s, seed_rows, failures)
    else:
        for s in todo:
            record(s, *_run_seed(ctx, s))

    rows.sort(key=_sort_key(cfg))
    write_results(rows, cfg.output_path)
    summary = summarize(rows)
    write_summary(summary, stem + ".summary.csv")
    return SweepResult(rows, summary, skipped)


def summarize(rows: Iterable[ResultRow]) -> list[SummaryRow]:
    """
    Median and quartiles of ``E_rel`` over ``r`` and ``s`` for every
    (method, kind, P, N, observable), plus the same statistics of the
    per-cell maximum over the basis under the tag ``Emax``.
    """
    groups: dict[tuple, list[float]] = {}
    cells: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.method, row.kind, row.P, row.N, row.observable), []).append(row.E_rel)
        if row.observable in BASIS_TAGS:
            cells.setdefault((row.method, row.kind, row.P, row.r, row.s, row.N), []).append(row)
    for (method, kind, P, _, _, N), cell_rows in cells.items():
        if len(cell_rows) == len(BASIS_TAGS):
            groups.setdefault((method, kind, P, N, EMAX_TAG), []).append(max_error(cell_rows))

    summary = []
    for key, values in groups.items():
        q25, median, q75 = np.percentile(values, [25, 50, 75])
        summary.append(SummaryRow(*key, float(median), float(q25), float(q75)))
        if key[4] == EMAX_TAG:
            logger.debug("%s %s P=%d N=%d: mean Emax %.3e", *key[:4], float(np.mean(values)))
    return summary


class LambdaFit(NamedTuple):
    intercept: float
    slope: float

    @property
    def decreasing(self) -> bool:
        return self.slope < 0


def weight_lambda_fit(w: WeightVector | Sequence[float], exponents: Sequence[float]) -> LambdaFit:
    """
    Least-squares line ``w_p = c0 + c1 lambda_p``.
    """
    weights = w.w if isinstance(w, WeightVector) else np.asarray(w, dtype=np.float64)
    if len(weights) != len(exponents) or len(weights) < 2:
        raise PreconditionError("need at least two (weight, exponent) pairs")
    slope, intercept = np.polyfit(np.asarray(exponents, dtype=np.float64), weights, 1)
    return LambdaFit(float(intercept), float(slope))


def weight_distribution(
    method: str,
    sizes: Iterable[int],
    *,
    system: CorrelationSystem | None = None,
    library: OrbitLibrary | None = None,
    measures: Sequence[ReferenceMeasure] | None = None,
    chaotic: Trajectory | None = None,
    alpha: float = 0.0,
) -> dict[int, npt.NDArray[np.float64]]:
    """
    Weights of the first ``P`` references for every ``P`` in ``sizes``.

    Least-squares methods restrict ``system``, ``markov`` uses ``measures``
    and ``chaotic``, ``pot`` takes prefix weights of a symbol-length ordered
    ``library``. Sizes whose solve fails are logged and left out.
    """
    if method not in SWEEP_METHODS:
        raise PreconditionError(f"unknown weight method {method!r}")
    needs = {"markov": (measures, chaotic), "pot": (library,), "uniform": ()}
    if any(v is None for v in needs.get(method, (system,))):
        raise PreconditionError(f"missing inputs for the {method} weight distribution")
    cycles = CycleData.from_library(library) if method == "pot" else None

    table: dict[int, npt.NDArray[np.float64]] = {}
    for P in sizes:
        try:
            if method == "uniform":
                w = uniform_weights(P)
            elif method == "markov":
                w = markov_weights(measures[:P], chaotic)
            elif method == "pot":
                w = pot_weights_prefix(cycles, P)
            else:
                w = _solve(method, system.restricted(P), alpha)
        except ChaosWeightsError as e:
            logger.warning("%s weights skipped at P=%d: %s", method, P, e)
            continue
        table[P] = w.w
    return table


def _format(value: object) -> str:
    return format_float(value) if isinstance(value, float) else str(value)


def write_results(rows: Iterable[ResultRow], path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RESULT_HEADER)
        writer.writerows([_format(v) for v in row] for row in rows)


def _append_rows(rows: Iterable[ResultRow], path: str) -> None:
    with open(path, "a", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerows([_format(v) for v in row] for row in rows)


def _read_csv(path: str, header: list[str]) -> list[tuple[list[str], int]]:
    if not os.path.exists(path):
        return []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        first = next(reader, None)
        if first != header:
            raise FileFormatError(f"expected header {','.join(header)}", 1)
        return [(line, i) for i, line in enumerate(reader, start=2)]


def read_results(path: str) -> list[ResultRow]:
    rows = []
    for values, lineno in _read_csv(path, RESULT_HEADER):
        if len(values) != len(RESULT_HEADER):
            raise FileFormatError("wrong number of columns", lineno)
        try:
            m, k, P, r, s, N, obs, e_true, e_hat, e_rel = values
            rows.append(
                ResultRow(m, k, int(P), int(r), int(s), int(N), obs, float(e_true), float(e_hat), float(e_rel))
            )
        except ValueError as e:
            raise FileFormatError(str(e), lineno)
    return rows


def write_summary(rows: Iterable[SummaryRow], path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        writer.writerows([_format(v) for v in row] for row in rows)


def read_summary(path: str) -> list[SummaryRow]:
    rows = []
    for values, lineno in _read_csv(path, SUMMARY_HEADER):
        if len(values) != len(SUMMARY_HEADER):
            raise FileFormatError("wrong number of columns", lineno)
        try:
            m, k, P, N, obs, med, q25, q75 = values
            rows.append(SummaryRow(m, k, int(P), int(N), obs, float(med), float(q25), float(q75)))
        except ValueError as e:
            raise FileFormatError(str(e), lineno)
    return rows


def write_truth(truth: Truth, path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRUTH_HEADER)
        for tag in truth.means:
            writer.writerow(
                [tag, format_float(truth.means[tag]), format_float(truth.variances[tag]),
                 format_float(truth.stderrs[tag])]
            )


def read_truth(path: str) -> Truth:
    truth = Truth({}, {}, {})
    for values, lineno in _read_csv(path, TRUTH_HEADER):
        if len(values) != len(TRUTH_HEADER):
            raise FileFormatError("wrong number of columns", lineno)
        tag = values[0]
        try:
            truth.means[tag] = float(values[1])
            truth.variances[tag] = float(values[2])
            truth.stderrs[tag] = float(values[3])
        except ValueError as e:
            raise FileFormatError(str(e), lineno)
    for tag in BASIS_TAGS:
        if tag not in truth.means:
            raise FileFormatError(f"truth file lacks observable {tag}")
    return truth


def write_theta_scan(scan: ThetaScan, path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(THETA_SCAN_HEADER)
        for row in zip(scan.thetas, scan.to_ones, scan.to_identity):
            writer.writerow([format_float(float(v)) for v in row])


def read_theta_scan(path: str) -> ThetaScan:
    """
    Read a scan written by :func:`write_theta_scan`; ``best`` is recomputed as
    the smallest theta where the two distances are closest.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    rows = []
    for values, lineno in _read_csv(path, THETA_SCAN_HEADER):
        if len(values) != len(THETA_SCAN_HEADER):
            raise FileFormatError("wrong number of columns", lineno)
        try:
            rows.append([float(v) for v in values])
        except ValueError as e:
            raise FileFormatError(str(e), lineno)
    if not rows:
        raise FileFormatError("theta scan has no rows", 2)
    data = np.array(sorted(rows))
    thetas, to_ones, to_identity = data.T
    best = float(thetas[int(np.argmin(np.abs(to_ones - to_identity)))])
    return ThetaScan(thetas, to_ones, to_identity, best)
