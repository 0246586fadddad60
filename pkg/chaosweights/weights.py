"""
Weightings of reference measures that do not go through periodic orbit
theory: Tikhonov least squares, normalized non-negative least squares, the
simplex-constrained problem, Markov (Voronoi) fractions and uniform weights.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
import numpy.typing as npt
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lstsq, pinvh
from scipy.optimize import nnls
from scipy.spatial import cKDTree

from .dynamics import Trajectory
from .errors import (
    DegenerateSolutionError,
    FileFormatError,
    PreconditionError,
    SingularSystemError,
)
from .kernel import CorrelationSystem
from .measures import ReferenceMeasure
from .utils import format_float, parse_float, parse_int, read_header

__all__ = [
    "WeightVector",
    "METHODS",
    "solve_tikhonov",
    "nnls_raw",
    "solve_nnls_normalized",
    "solve_constrained",
    "project_to_simplex",
    "markov_weights",
    "uniform_weights",
    "solve_pseudoinverse",
    "solve_observable_fit",
    "alpha_scan",
    "AlphaScanRow",
    "save_weights",
    "load_weights",
]

logger = logging.getLogger(__name__)

METHODS = ("lsw", "nnls", "constrained", "markov", "uniform", "pot", "pinv", "observable-fit")

DEFAULT_ALPHA = 1e-10


@dataclass(eq=False)
class WeightVector:
    """
    Weights of ``P`` reference measures and where they came from.

    :param kind: ``"orbit"`` or ``"snippet"``: what the measures are.
    :param converged: False when an iterative solver hit its cap.
    """

    w: npt.NDArray[np.float64]
    method: str
    r: int = 1
    s: int = 0
    n_samples: int = 0
    theta: float = 0.0
    alpha: float = 0.0
    kind: str = "orbit"
    converged: bool = True
    support: int | None = None
    ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.method not in METHODS:
            raise PreconditionError(f"unknown weighting method {self.method!r}")
        if not np.all(np.isfinite(self.w)):
            raise PreconditionError("weights must be finite")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightVector):
            return NotImplemented
        return (
            np.array_equal(self.w, other.w)
            and (self.method, self.r, self.s, self.n_samples, self.theta, self.alpha, self.kind)
            == (other.method, other.r, other.s, other.n_samples, other.theta, other.alpha, other.kind)
        )

    def __len__(self) -> int:
        return len(self.w)

    @property
    def size(self) -> int:
        return len(self.w)

    @property
    def total(self) -> float:
        return float(self.w.sum())

    def with_provenance(self, **kwargs: object) -> WeightVector:
        return replace(self, **kwargs)


def _provenance(system: CorrelationSystem) -> dict:
    return {"n_samples": system.n_samples, "theta": system.theta, "s": system.seed, "ids": list(system.ids)}


def solve_tikhonov(system: CorrelationSystem, alpha: float = DEFAULT_ALPHA) -> WeightVector:
    """
    Solve ``(A + alpha I) w = b`` by Cholesky factorization.

    :raises SingularSystemError: when ``A + alpha I`` is not numerically
        positive definite.
    """
    if alpha < 0:
        raise PreconditionError("alpha must be non-negative")
    matrix = system.a + alpha * np.eye(system.size)
    try:
        factor = cho_factor(matrix)
    except LinAlgError as e:
        raise SingularSystemError(
            f"A + {alpha:g} I is not positive definite ({e}); increase alpha"
        )
    w = cho_solve(factor, system.b)
    # One step of iterative refinement.
    w = w + cho_solve(factor, system.b - matrix @ w)
    if not np.all(np.isfinite(w)):
        raise SingularSystemError("Cholesky solve produced non-finite weights")

    residual = np.linalg.norm(matrix @ w - system.b)
    if residual > 1e-10 * np.linalg.norm(system.b):
        logger.warning("Tikhonov residual %.3e exceeds 1e-10 |b|", residual)
    logger.debug("Tikhonov weights: sum %.12f, residual %.3e", w.sum(), residual)
    return WeightVector(w, "lsw", alpha=alpha, **_provenance(system))


def nnls_raw(system: CorrelationSystem) -> npt.NDArray[np.float64]:
    "Lawson-Hanson solution of ``min |A w - b|`` with ``w >= 0``, unnormalized."
    w, _ = nnls(system.a, system.b)
    return w


def solve_nnls_normalized(system: CorrelationSystem) -> WeightVector:
    """
    Non-negative least squares rescaled to sum to one. Usually sparse.
    """
    raw = nnls_raw(system)
    total = raw.sum()
    if not total > 0:
        raise DegenerateSolutionError("non-negative least squares returned all zeros")
    support = int(np.count_nonzero(raw))
    logger.info(
        "NNLS support %d of %d, raw sum %.10f, residual %.3e",
        support,
        system.size,
        total,
        np.linalg.norm(system.a @ raw - system.b),
    )
    return WeightVector(raw / total, "nnls", support=support, **_provenance(system))


def project_to_simplex(v: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """
    Euclidean projection onto ``{w >= 0, sum w = 1}`` (sort based).
    """
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def solve_constrained(
    system: CorrelationSystem,
    w0: npt.NDArray[np.float64] | None = None,
    *,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> WeightVector:
    """
    Minimize ``|A w - b|^2`` over the probability simplex by projected
    gradient descent with step ``1 / L``. The result depends on ``w0``.

    :param w0: Starting point on the simplex; uniform weights by default.
    """
    size = system.size
    w = np.full(size, 1.0 / size) if w0 is None else np.asarray(w0, dtype=np.float64).copy()
    if w.shape != (size,) or np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-9:
        raise PreconditionError("w0 must lie on the probability simplex")

    ata = system.a.T @ system.a
    atb = system.a.T @ system.b
    lipschitz = 2.0 * np.linalg.eigvalsh(ata)[-1]
    if not lipschitz > 0:
        return WeightVector(w, "constrained", **_provenance(system))
    step = 1.0 / lipschitz

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad = 2.0 * (ata @ w - atb)
        w_next = project_to_simplex(w - step * grad)
        moved = np.linalg.norm(w_next - w) / step
        w = w_next
        if moved < tol:
            converged = True
            break

    if not converged:
        logger.warning(
            "projected gradient stopped after %d iterations without converging", max_iter
        )
    logger.debug(
        "constrained weights after %d iterations, objective %.3e",
        iterations,
        system.objective(w),
    )
    return WeightVector(
        w,
        "constrained",
        converged=converged,
        support=int(np.count_nonzero(w)),
        **_provenance(system),
    )


def _sum_to_one(w: npt.NDArray[np.float64], index: int) -> npt.NDArray[np.float64]:
    """
    Nudge ``w[index]`` until ``w.sum()`` is exactly 1.0 in floating point.
    """
    for _ in range(64):
        total = w.sum()
        if total == 1.0:
            break
        nudged = w[index] + (1.0 - total)
        if nudged == w[index]:
            nudged = np.nextafter(w[index], np.inf if total < 1.0 else -np.inf)
        w[index] = nudged
    return w


def markov_weights(
    measures: Sequence[ReferenceMeasure], chaotic: Trajectory, n_samples: int | None = None
) -> WeightVector:
    """
    Fraction of chaotic samples whose nearest stored reference point belongs
    to each measure. Ties go to the lowest measure index.
    """
    if not measures:
        raise PreconditionError("need at least one reference measure")
    n = len(chaotic) if n_samples is None else n_samples
    if not 1 <= n <= len(chaotic):
        raise PreconditionError(f"N={n} exceeds the {len(chaotic)} available chaotic samples")

    points = np.concatenate([m.points for m in measures])
    labels = np.concatenate([np.full(len(m), p) for p, m in enumerate(measures)])
    tree = cKDTree(points)

    k = min(4, len(points))
    dist, idx = tree.query(chaotic.states[:n], k=k)
    if k == 1:
        owner = labels[idx]
    else:
        candidates = np.where(dist == dist[:, :1], labels[idx], len(measures))
        owner = candidates.min(axis=1)

    counts = np.bincount(owner, minlength=len(measures))
    return WeightVector(
        _sum_to_one(counts / n, int(np.argmax(counts))),
        "markov",
        n_samples=n,
        support=int(np.count_nonzero(counts)),
        ids=[m.id for m in measures],
    )


def uniform_weights(size: int) -> WeightVector:
    if size < 1:
        raise PreconditionError("P must be at least 1")
    return WeightVector(_sum_to_one(np.full(size, 1.0 / size), size - 1), "uniform")


def solve_pseudoinverse(system: CorrelationSystem) -> WeightVector:
    """
    Minimum-norm least-squares weights ``A^+ b``, defined for singular ``A``.
    """
    return WeightVector(pinvh(system.a) @ system.b, "pinv", **_provenance(system))


def solve_observable_fit(
    per_measure: npt.NDArray[np.float64], chaotic: npt.NDArray[np.float64]
) -> WeightVector:
    """
    Weights that best reproduce the chaotic averages of a chosen set of
    observables: least squares for ``sum_p w_p E_p[a_k] = E[a_k]``.

    :param per_measure: ``(P, K)`` matrix of ``E_p[a_k]``.
    :param chaotic: ``K`` chaotic averages ``E[a_k]``.
    """
    per_measure = np.asarray(per_measure, dtype=np.float64)
    chaotic = np.asarray(chaotic, dtype=np.float64)
    if per_measure.ndim != 2 or per_measure.shape[1] != len(chaotic):
        raise PreconditionError("need a (P, K) matrix and K chaotic averages")
    w = lstsq(per_measure.T, chaotic)[0]
    return WeightVector(w, "observable-fit")


class AlphaScanRow(NamedTuple):
    alpha: float
    residual: float
    total: float
    negative_mass: float


def alpha_scan(system: CorrelationSystem, alphas: Sequence[float]) -> list[AlphaScanRow]:
    """
    Residual ``|A w - b|``, ``sum w`` and ``sum max(-w, 0)`` of the Tikhonov
    weights for every ``alpha``. Singular cases are reported as NaN.
    """
    rows = []
    for alpha in alphas:
        try:
            w = solve_tikhonov(system, alpha).w
        except SingularSystemError as e:
            logger.info("alpha=%g: %s", alpha, e)
            rows.append(AlphaScanRow(alpha, np.nan, np.nan, np.nan))
            continue
        rows.append(
            AlphaScanRow(
                alpha,
                float(np.linalg.norm(system.a @ w - system.b)),
                float(w.sum()),
                float(np.maximum(-w, 0.0).sum()),
            )
        )
    return rows


MAGIC = "WEIGHTS"
VERSION = "v1"


def save_weights(weights: WeightVector, path: str) -> None:
    lines = [
        f"{MAGIC} {VERSION} method={weights.method} P={weights.size} r={weights.r} "
        f"s={weights.s} N={weights.n_samples} theta={format_float(weights.theta)} "
        f"alpha={format_float(weights.alpha)} kind={weights.kind}"
    ]
    lines.extend(format_float(v) for v in weights.w)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_weights(path: str) -> WeightVector:
    with open(path) as f:
        lines = [line for line in f.read().splitlines() if line.strip()]
    if not lines:
        raise FileFormatError("empty file", 1)
    header = read_header(lines[0], MAGIC, VERSION)
    for key in ("method", "P", "r", "s", "N", "theta", "alpha"):
        if key not in header:
            raise FileFormatError(f"header lacks {key}=", 1)
    size = parse_int(header["P"], 1)
    if len(lines) - 1 != size:
        raise FileFormatError(f"expected {size} weights, found {len(lines) - 1}", len(lines))
    w = np.array([parse_float(v, i) for i, v in enumerate(lines[1:], start=2)])
    try:
        return WeightVector(
            w,
            header["method"],
            r=parse_int(header["r"], 1),
            s=parse_int(header["s"], 1),
            n_samples=parse_int(header["N"], 1),
            theta=parse_float(header["theta"], 1),
            alpha=parse_float(header["alpha"], 1),
            kind=header.get("kind", "orbit"),
        )
    except PreconditionError as e:
        raise FileFormatError(str(e), 1)
