"""
Static SVG figures: theta scan, error against N and against P, weights
against Floquet exponents and against P, smoothed densities and orbit shapes.
"""

from __future__ import annotations

import logging
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dynamics import Params
from .errors import PreconditionError
from .experiments import EMAX_TAG, SummaryRow, weight_lambda_fit
from .kernel import ThetaScan, density
from .library import OrbitLibrary
from .measures import ReferenceMeasure
from .orbits import orbit_samples

__all__ = [
    "plot_theta_scan",
    "plot_error_vs_n",
    "plot_error_vs_p",
    "plot_weight_vs_lambda",
    "plot_weight_distribution",
    "plot_density_slice",
    "plot_orbits",
]

logger = logging.getLogger(__name__)


def _save(fig: plt.Figure, path: str) -> None:
    # A fixed hash salt keeps the SVG ids stable between runs.
    plt.rcParams["svg.hashsalt"] = "chaosweights"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("wrote %s", path)


def plot_theta_scan(scan: ThetaScan, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(scan.thetas, scan.to_ones, label="distance to all ones", color="k")
    ax.loglog(scan.thetas, scan.to_identity, label="distance to identity", color="tab:red")
    ax.axvline(scan.best, color="gray", linestyle=":", label=f"theta = {scan.best:.3g}")
    ax.set_xlabel("theta")
    ax.set_ylabel("Frobenius distance")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def _series(
    rows: Sequence[SummaryRow], method: str, kind: str, observable: str, key: str, fixed: dict
) -> tuple[np.ndarray, ...]:
    selected = sorted(
        (
            r
            for r in rows
            if r.method == method
            and r.kind == kind
            and r.observable == observable
            and all(getattr(r, k) == v for k, v in fixed.items())
        ),
        key=lambda r: getattr(r, key),
    )
    return (
        np.array([getattr(r, key) for r in selected], dtype=float),
        np.array([r.median_Erel for r in selected]),
        np.array([r.q25 for r in selected]),
        np.array([r.q75 for r in selected]),
    )


def _error_plot(
    rows: Sequence[SummaryRow], path: str, key: str, fixed: dict, kind: str, observable: str
) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for method in sorted({r.method for r in rows}):
        x, median, q25, q75 = _series(rows, method, kind, observable, key, fixed)
        positive = median > 0
        if not positive.any():
            continue
        (line,) = ax.loglog(x[positive], median[positive], marker="o", label=method)
        ax.fill_between(
            x[positive],
            np.maximum(q25[positive], 1e-300),
            q75[positive],
            color=line.get_color(),
            alpha=0.2,
        )
    ax.set_xlabel(key)
    ax.set_ylabel(f"median {observable} (IQR shaded)")
    ax.set_title(", ".join(f"{k}={v}" for k, v in fixed.items()) + f" [{kind}]")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_error_vs_n(
    rows: Sequence[SummaryRow],
    path: str,
    *,
    P: int | None = None,
    kind: str = "orbit",
    observable: str = EMAX_TAG,
) -> None:
    """
    Median error against the number of chaotic samples at fixed ``P``
    (the largest by default).
    """
    if P is None:
        P = max(r.P for r in rows)
    _error_plot(rows, path, "N", {"P": P}, kind, observable)


def plot_error_vs_p(
    rows: Sequence[SummaryRow],
    path: str,
    *,
    N: int | None = None,
    kind: str = "orbit",
    observable: str = EMAX_TAG,
) -> None:
    if N is None:
        N = max(r.N for r in rows)
    _error_plot(rows, path, "P", {"N": N}, kind, observable)


def plot_weight_vs_lambda(
    weights: Sequence[float], exponents: Sequence[float], path: str, *, label: str = ""
) -> None:
    fit = weight_lambda_fit(weights, exponents)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter(exponents, weights, s=12, color="k")
    xs = np.linspace(min(exponents), max(exponents), 2)
    ax.plot(xs, fit.intercept + fit.slope * xs, color="tab:red", label=f"slope {fit.slope:.3g}")
    ax.set_xlabel("Floquet exponent")
    ax.set_ylabel("weight")
    if label:
        ax.set_title(label)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_weight_distribution(
    weights_by_P: Mapping[int, Sequence[float]], path: str, *, label: str = ""
) -> None:
    """
    Heatmap of weight ``w_p`` (columns) against library size ``P`` (rows).
    Cells past ``P`` stay blank; the colour scale is symmetric about zero.
    """
    sizes = sorted(weights_by_P)
    if not sizes:
        raise PreconditionError("no weight vectors to draw")
    width = max(len(weights_by_P[P]) for P in sizes)
    grid = np.full((len(sizes), width), np.nan)
    for row, P in enumerate(sizes):
        w = np.asarray(weights_by_P[P], dtype=np.float64)
        grid[row, : len(w)] = w
    vmax = float(np.nanmax(np.abs(grid))) or 1.0

    fig, ax = plt.subplots(figsize=(6, 5))
    mesh = ax.pcolormesh(
        np.arange(width + 1) + 0.5,
        np.arange(len(sizes) + 1),
        np.ma.masked_invalid(grid),
        cmap="RdBu_r",
        vmin=-vmax,
        vmax=vmax,
    )
    fig.colorbar(mesh, ax=ax, label="weight")
    ax.set_yticks(np.arange(len(sizes)) + 0.5)
    ax.set_yticklabels([str(P) for P in sizes])
    ax.set_xlabel("orbit index p")
    ax.set_ylabel("P")
    if label:
        ax.set_title(label)
    fig.tight_layout()
    _save(fig, path)


def plot_density_slice(
    measures: Sequence[ReferenceMeasure],
    theta: float,
    path: str,
    *,
    weights: Sequence[float] | None = None,
    resolution: int = 60,
    y_levels: int = 9,
) -> None:
    """
    Smoothed density of a weighted combination of measures on an x-z grid,
    averaged over ``y_levels`` slices in y.
    """
    w = np.ones(len(measures)) / len(measures) if weights is None else np.asarray(weights)
    xs = np.linspace(-25, 25, resolution)
    zs = np.linspace(0, 50, resolution)
    ys = np.linspace(-25, 25, y_levels)
    gx, gz = np.meshgrid(xs, zs)
    values = np.zeros(gx.size)
    for y in ys:
        grid = np.column_stack([gx.ravel(), np.full(gx.size, y), gz.ravel()])
        for wp, m in zip(w, measures):
            values += wp * density(m, grid, theta)
    values /= len(ys)

    fig, ax = plt.subplots(figsize=(5, 5))
    mesh = ax.pcolormesh(xs, zs, values.reshape(gx.shape), shading="auto", cmap="viridis")
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    fig.tight_layout()
    _save(fig, path)


def plot_orbits(library: OrbitLibrary, p: Params, path: str) -> None:
    "Orbits projected on the x-z plane, coloured by symbol length."
    lengths = sorted({len(o.symbol) for o in library})
    cmap = plt.get_cmap("viridis", max(len(lengths), 2))
    fig, ax = plt.subplots(figsize=(5, 5))
    for orbit in library:
        points = orbit_samples(orbit, p)
        closed = np.vstack([points, points[:1]])
        color = cmap(lengths.index(len(orbit.symbol)))
        ax.plot(closed[:, 0], closed[:, 2], linewidth=0.6, color=color)
    for i, n in enumerate(lengths):
        ax.plot([], [], color=cmap(i), label=f"length {n}")
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.legend(fontsize="small")
    fig.tight_layout()
    _save(fig, path)
