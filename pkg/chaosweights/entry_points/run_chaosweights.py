#!/usr/bin/env python
"""
chaosweights: weighted reference-measure estimates of chaotic averages.

commands:
  find-orbits           Search and refine a complete periodic orbit library.
  snippets              Cut a chaotic run into equal trajectory snippets.
  theta-scan            Distances of the correlation matrix to 1 and I over theta.
  build-system          Assemble the correlation system A w = b.
  weights               Compute a weight vector.
  estimate              Weighted estimates of observable averages.
  lyapunov              Benettin spectrum and weighted Floquet estimate.
  sweep                 Run the error-comparison experiment.
  plot                  Draw figures from result and data files.

environment variables:
  CHAOSWEIGHTS_CONFIG_HOME: a configuration directory to use
  NO_COLOR: disable colors in terminal output
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from textwrap import dedent
from typing import IO, Callable, Sequence

from prompt_toolkit.shortcuts import ProgressBar

from chaosweights import __version__
from chaosweights.config import SETTING_NAMES, Settings, get_config_file, load_settings
from chaosweights.dynamics import lyapunov_benettin, lyapunov_spectrum_from_leading
from chaosweights.errors import ChaosWeightsError, ConfigError, PreconditionError
from chaosweights.experiments import (
    EMAX_TAG,
    NOT_COMPLETE,
    SWEEP_METHODS,
    read_results,
    read_summary,
    read_theta_scan,
    run_sweep,
    summarize,
    weight_distribution,
    write_theta_scan,
)
from chaosweights.kernel import (
    KernelConfig,
    build_system,
    load_system,
    parse_theta_grid,
    save_system,
    theta_scan,
)
from chaosweights.library import (
    OrbitLibrary,
    build_complete_library,
    complete_length,
    load_library,
    save_library,
)
from chaosweights.measures import (
    ReferenceMeasure,
    chaotic_run,
    load_snippets,
    measure_average,
    orbit_measures,
    sample_snippets,
    save_snippets,
    snippet_measures,
)
from chaosweights.observables import (
    BASIS_TAGS,
    LYAPUNOV_TAG,
    estimate_average,
    get_observable,
    lyapunov_estimate,
)
from chaosweights.pot import CycleData, pot_weights, pot_weights_prefix
from chaosweights.printer import OutputPrinter, configure_logging
from chaosweights.style import get_style
from chaosweights.utils import format_floats
from chaosweights.weights import (
    WeightVector,
    alpha_scan,
    load_weights,
    markov_weights,
    save_weights,
    solve_constrained,
    solve_nnls_normalized,
    solve_pseudoinverse,
    solve_tikhonov,
    uniform_weights,
)

__all__ = ["create_parser", "main", "run"]

logger = logging.getLogger("chaosweights.cli")

WEIGHT_METHODS = ("lsw", "nnls", "constrained", "pinv", "markov", "uniform", "pot")
PLOTS = ("errors", "orbits", "weights", "density", "distribution", "theta-scan")


class UsageError(ConfigError):
    code = "usage"


class _Parser(argparse.ArgumentParser):
    def print_help(self, file: IO[str] | None = None) -> None:
        super().print_help(file)
        print(
            dedent(
                """
                environment variables:
                  CHAOSWEIGHTS_CONFIG_HOME: a configuration directory to use
                  NO_COLOR: disable colors in terminal output
                """,
            ).rstrip(),
            file=file,
        )

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text: str) -> int:
    try:
        value = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _non_negative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="Settings file (key = value lines).")
    common.add_argument("--seed", type=int, help="Master seed of every random stream.")
    common.add_argument(
        "--jobs", type=_positive_int, help="Worker processes (default: CPU count)."
    )
    common.add_argument(
        "--paper-scale",
        "--full-scale",
        dest="full_scale",
        action="store_true",
        help="Full-size sweeps: S=256, R=256, N up to 1e6.",
    )
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="More log output."
    )
    common.add_argument(
        "-q", "--quiet", action="count", default=0, help="Less log output."
    )
    return common


def _reference_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--library", type=str, help="Orbit library file.")
    parser.add_argument("--snippets", type=str, help="Snippet file.")
    parser.add_argument(
        "--kind",
        choices=("orbit", "snippet"),
        default="orbit",
        help="Use orbits or snippets as references.",
    )
    parser.add_argument(
        "--P", dest="size", type=_positive_int, help="Number of references."
    )


def create_parser() -> _Parser:
    parser = _Parser(
        prog="chaosweights",
        description="chaosweights: weighted reference-measure estimates of chaotic averages.",
    )
    parser.add_argument(
        "-V",
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    common = _common_options()
    verbs = parser.add_subparsers(dest="verb", metavar="command")
    verbs.required = True

    p = verbs.add_parser(
        "find-orbits", parents=[common], help="Search a complete orbit library."
    )
    p.add_argument("--lmax", type=_positive_int, help="Longest symbol length.")
    p.add_argument("--out", dest="out_path", type=str, help="Library file to write.")
    p.add_argument("--search-runs", type=_positive_int, help="Chaotic runs seeding guesses.")
    p.add_argument(
        "--search-duration", type=_positive_float, help="Length of every seeding run."
    )

    p = verbs.add_parser("snippets", parents=[common], help="Sample trajectory snippets.")
    p.add_argument("--count", type=_positive_int, help="Number of snippets.")
    p.add_argument(
        "--match-library",
        type=str,
        help="Match the count and total duration of this orbit library.",
    )
    p.add_argument("--duration", type=_positive_float, help="Total duration.")
    p.add_argument("--out", dest="out_path", type=str, help="Snippet file to write.")

    p = verbs.add_parser("theta-scan", parents=[common], help="Scan the kernel width.")
    _reference_options(p)
    p.add_argument("--grid", type=str, help="lo:hi:logN, lo:hi:N or a comma list.")
    p.add_argument("--out", dest="out_path", default="theta_scan.csv", help="CSV to write.")
    p.add_argument("--plot", type=str, help="Also draw the scan to this SVG file.")

    p = verbs.add_parser("build-system", parents=[common], help="Assemble A and b.")
    _reference_options(p)
    p.add_argument("--theta", type=_positive_float, help="Kernel variance.")
    p.add_argument("--N", dest="n_samples", type=_positive_int, help="Chaotic samples.")
    p.add_argument("--dt", type=_positive_float, help="Chaotic sample spacing.")
    p.add_argument("--prefactor", action="store_true", default=None, help="Scale the kernel.")
    p.add_argument("--out", dest="out_path", default="system.txt", help="System file to write.")

    p = verbs.add_parser("weights", parents=[common], help="Compute weights.")
    _reference_options(p)
    p.add_argument("--method", choices=WEIGHT_METHODS, required=True)
    p.add_argument("--system", type=str, help="System file (lsw, nnls, constrained, pinv).")
    p.add_argument("--alpha", type=_non_negative_float, help="Tikhonov regularization.")
    p.add_argument(
        "--alpha-scan",
        type=str,
        help="Report residual and negative mass over these alphas (lo:hi:logN).",
    )
    p.add_argument("--N", dest="n_samples", type=_positive_int, help="Chaotic samples (markov).")
    p.add_argument(
        "--prefix",
        action="store_true",
        help="pot: weight the largest complete library inside the first P orbits.",
    )
    p.add_argument("--out", dest="out_path", default="weights.txt", help="Weight file to write.")

    p = verbs.add_parser("estimate", parents=[common], help="Weighted averages.")
    _reference_options(p)
    p.add_argument("--weights", required=True, help="Weight file.")
    p.add_argument(
        "--observables",
        default="all",
        help=f"'all' or a comma list of: {', '.join(BASIS_TAGS + (LYAPUNOV_TAG,))}.",
    )
    p.add_argument("--out", dest="out_path", type=str, help="Also write a CSV.")

    p = verbs.add_parser("lyapunov", parents=[common], help="Lyapunov exponents.")
    p.add_argument("--t-total", type=_positive_float, help="Averaging time.")
    p.add_argument("--weights", type=str, help="Also estimate from orbit weights.")
    p.add_argument("--library", type=str, help="Orbit library for --weights.")

    p = verbs.add_parser("sweep", parents=[common], help="Run the error comparison.")
    p.add_argument("--library", type=str, help="Orbit library file.")
    p.add_argument("--snippets", type=str, help="Snippet file.")
    p.add_argument("--out", dest="out", type=str, help="Result CSV to write.")

    p = verbs.add_parser("plot", parents=[common], help="Draw figures.")
    p.add_argument("--what", choices=PLOTS, default="errors")
    p.add_argument(
        "--from", dest="source", type=str, help="Result, summary or theta scan CSV."
    )
    p.add_argument("--library", type=str)
    p.add_argument("--method", choices=SWEEP_METHODS, help="Weights drawn by distribution.")
    p.add_argument("--system", type=str, help="System file (distribution of lsw, nnls, ...).")
    p.add_argument("--P", dest="size", type=_positive_int, help="Largest P (distribution).")
    p.add_argument("--N", dest="n_samples", type=_positive_int, help="Chaotic samples (markov).")
    p.add_argument("--weights", type=str)
    p.add_argument("--theta", type=_positive_float)
    p.add_argument("--out", dest="out_path", type=str, help="Figure (or prefix for errors).")

    return parser


def _settings(a: argparse.Namespace) -> Settings:
    overrides = {k: v for k, v in vars(a).items() if k in SETTING_NAMES}
    return load_settings(a.config, overrides, full_scale=a.full_scale)


def _library(path: str) -> OrbitLibrary:
    return load_library(path).sorted_by_length()


def _measures(
    a: argparse.Namespace, settings: Settings, size: int | None = None
) -> list[ReferenceMeasure]:
    """
    The first ``size`` references (all by default), orbits in symbol-length
    order or snippets in file order.
    """
    size = size or a.size
    if a.kind == "snippet":
        snippets = load_snippets(settings.snippets or "snippets.txt")
        if size and size > len(snippets):
            raise PreconditionError(f"P={size} but only {len(snippets)} snippets")
        return snippet_measures(snippets[:size])
    library = _library(settings.library)
    if size and size > len(library):
        raise PreconditionError(f"P={size} but only {len(library)} orbits")
    return orbit_measures(library.prefix(size or len(library)).orbits, settings.params)


def _find_orbits(a: argparse.Namespace, settings: Settings, printer: OutputPrinter) -> None:
    path = a.out_path or settings.library
    library = build_complete_library(settings.lmax, settings.params, settings.search_budget())
    save_library(library, path)
    printer.display_written(path, "orbits", len(library))


def _snippets(a: argparse.Namespace, settings: Settings, printer: OutputPrinter) -> None:
    count, duration = a.count, a.duration
    if a.match_library:
        library = load_library(a.match_library)
        count = count or len(library)
        duration = duration or sum(o.period for o in library)
    if not count or not duration:
        raise UsageError("snippets needs --count and --duration, or --match-library")

    path = a.out_path or settings.snippets or "snippets.txt"
    snippets = sample_snippets(settings.params, duration, count, settings.seed)
    save_snippets(snippets, path)
    printer.display_written(path, "snippets", len(snippets))


def _theta_scan(a: argparse.Namespace, settings: Settings, printer: OutputPrinter) -> None:
    grid = parse_theta_grid(a.grid or settings.theta_grid)
    scan = theta_scan(_measures(a, settings), grid)
    write_theta_scan(scan, a.out_path)
    printer.display_value("crossover theta", scan.best)
    printer.display_written(a.out_path, "theta scan")
    if a.plot:
        from chaosweights.plotting import plot_theta_scan

        plot_theta_scan(scan, a.plot)


def _build_system(a: argparse.Namespace, settings: Settings, printer: OutputPrinter) -> None:
    measures = _measures(a, settings)
    n_samples = a.n_samples or max(settings.samples)
    chaotic = chaotic_run(
        settings.params, n_samples, settings.seed, dt=settings.dt, rtol=settings.chaotic_rtol
    )
    config = KernelConfig(settings.theta, prefactor=settings.prefactor)
    system = build_system(measures, chaotic, config, seed=settings.seed)
    save_system(system, a.out_path)
    printer.display_written(a.out_path, f"{system.size}x{system.size} system")


def _pot(a: argparse.Namespace, settings: Settings) -> WeightVector:
    if a.kind != "orbit":
        raise PreconditionError("POT weights need periodic orbit references")
    library = _library(settings.library)
    size = a.size or len(library)
    if size > len(library):
        raise PreconditionError(f"P={size} but only {len(library)} orbits")
    cycles = CycleData.from_library(library).head(size)
    if a.prefix:
        return pot_weights_prefix(cycles, size)
    length = complete_length(library.words[:size])
    if length is None:
        raise PreconditionError(f"P={size} is {NOT_COMPLETE}")
    return pot_weights(cycles, length)


def _weights(a: argparse.Namespace, settings: Settings, printer: OutputPrinter) -> None:
    if a.method in ("lsw", "nnls", "constrained", "pinv"):
        system = load_system(a.system or "system.txt")
        if a.alpha_scan:
            rows = alpha_scan(system, parse_theta_grid(a.alpha_scan))
            printer.display_table(["alpha", "residual", "sum_w", "negative_mass"], rows)
        if a.method == "lsw":
            w = solve_tikhonov(system, settings.alpha)
        elif a.method == "nnls":
            w = solve_nnls_normalized(system)
        elif a.method == "constrained":
            w = solve_constrained(system)
            if not w.converged:
                logger.warning("projected gradient stopped at its iteration cap")
        else:
            w = solve_pseudoinverse(system)
        w = w.with_provenance(kind=a.kind)
    elif a.method == "uniform":
        if a.size is None:
            raise UsageError("uniform weights need --P")
        w = uniform_weights(a.size).with_provenance(kind=a.kind)
    elif a.method == "markov":
        measures = _measures(a, settings)
        n_samples = a.n_samples or max(settings.samples)
        chaotic = chaotic_run(
            settings.params, n_samples, settings.seed, dt=settings.dt, rtol=settings.chaotic_rtol
        )
        w = markov_weights(measures, chaotic).with_provenance(kind=a.kind, s=settings.seed)
    else:
        w = _pot(a, settings)

    save_weights(w, a.out_path)
    printer.display_written(a.out_path, f"{w.method} weights", w.size)


def _observable_tags(text: str, kind: str) -> list[str]:
    if text == "all":
        return list(BASIS_TAGS) + ([LYAPUNOV_TAG] if kind == "orbit" else [])
    tags = [t.strip() for t in text.split(",") if t.strip()]
    for tag in tags:
        if tag != LYAPUNOV_TAG:
            get_observable(tag)
    return tags


def _estimate(a: argparse.Namespace, settings: Settings, printer: OutputPrinter) -> None:
    w = load_weights(a.weights)
    tags = _observable_tags(a.observables, w.kind)
    a.kind = w.kind
    measures = _measures(a, settings, w.size)
    if len(measures) != w.size:
        raise PreconditionError(f"{w.size} weights but {len(measures)} references")

    rows = []
    for tag in tags:
        if tag == LYAPUNOV_TAG:
            value = lyapunov_estimate(w, [m.floquet_exponent for m in measures])
        else:
            observable = get_observable(tag)
            value = estimate_average(w, [measure_average(m, observable) for m in measures])
        rows.append((tag, value))
    printer.display_table(["observable", "E_hat"], rows)

    if a.out_path:
        with open(a.out_path, "w") as f:
            f.write("observable,E_hat\n")
            f.writelines(f"{tag},{format_floats([value])}\n" for tag, value in rows)
        printer.display_written(a.out_path, "estimates", len(rows))


def _lyapunov(a: argparse.Namespace, settings: Settings, printer: OutputPrinter) -> None:
    p = settings.params
    spectrum = lyapunov_benettin(p, a.t_total or settings.lyapunov_time, seed=settings.seed)
    rows: list[tuple[str, float, float, float, float]] = [
        ("benettin", *spectrum, sum(spectrum))
    ]
    if a.weights:
        w = load_weights(a.weights)
        library = _library(a.library or settings.library).prefix(w.size)
        lam = lyapunov_estimate(w, [o.floquet_exponent for o in library])
        implied = lyapunov_spectrum_from_leading(lam, p)
        rows.append((f"{w.method} weights", *implied, sum(implied)))
    printer.display_table(["estimate", "lambda1", "lambda2", "lambda3", "sum"], rows)


def _sweep(a: argparse.Namespace, settings: Settings, printer: OutputPrinter) -> None:
    cfg = settings.experiment_config()
    library = load_library(cfg.library_path)
    snippets = load_snippets(cfg.snippet_path) if "snippet" in cfg.kinds else None

    if sys.stderr.isatty() and a.quiet == 0:
        with ProgressBar(title="sweep", file=sys.stderr) as pb:
            counter = pb(label="seeds", total=cfg.seeds)
            result = run_sweep(
                cfg, library, snippets, on_seed_done=lambda s: counter.item_completed()
            )
    else:
        result = run_sweep(
            cfg, library, snippets, on_seed_done=lambda s: logger.info("seed %d done", s)
        )

    largest = cfg.max_samples
    printer.display_table(
        ["method", "kind", "P", "median Emax", "q25", "q75"],
        [
            (r.method, r.kind, r.P, r.median_Erel, r.q25, r.q75)
            for r in result.summary
            if r.observable == EMAX_TAG and r.N == largest
        ],
    )
    printer.display_written(cfg.output_path, "result rows", len(result.rows))


def _plot_distribution(a: argparse.Namespace, settings: Settings, printer: OutputPrinter) -> None:
    """
    Weights against P at the identity ordering, one row per P up to ``--P``.
    """
    from chaosweights import plotting

    if a.method is None:
        raise UsageError("plot --what distribution needs --method")
    inputs: dict = {}
    if a.method in ("lsw", "nnls", "constrained", "pinv"):
        inputs["system"] = load_system(a.system or "system.txt")
        available = inputs["system"].size
    elif a.method == "uniform":
        if a.size is None:
            raise UsageError("uniform weights need --P")
        available = a.size
    else:
        library = _library(a.library or settings.library)
        available = len(library)
        if a.method == "pot":
            inputs["library"] = library
        else:
            inputs["measures"] = orbit_measures(library.orbits, settings.params)
            inputs["chaotic"] = chaotic_run(
                settings.params,
                a.n_samples or max(settings.samples),
                settings.seed,
                dt=settings.dt,
                rtol=settings.chaotic_rtol,
            )
    largest = a.size or available
    if largest > available:
        raise PreconditionError(f"P={largest} but only {available} references")

    table = weight_distribution(
        a.method, range(1, largest + 1), alpha=settings.alpha, **inputs
    )
    path = a.out_path or f"distribution.{a.method}.svg"
    plotting.plot_weight_distribution(table, path, label=a.method)
    printer.display_written(path, "figure")


def _plot(a: argparse.Namespace, settings: Settings, printer: OutputPrinter) -> None:
    from chaosweights import plotting

    if a.what == "errors":
        source = a.source or settings.out
        if source.endswith(".summary.csv"):
            summary = read_summary(source)
        else:
            summary = summarize(read_results(source))
        if not summary:
            raise PreconditionError(f"{source} holds no results")
        prefix = a.out_path or os.path.splitext(source)[0]
        for kind in sorted({r.kind for r in summary}):
            for name, draw in (
                ("error_vs_n", plotting.plot_error_vs_n),
                ("error_vs_p", plotting.plot_error_vs_p),
            ):
                path = f"{prefix}.{kind}.{name}.svg"
                draw(summary, path, kind=kind)
                printer.display_written(path, "figure")
        return

    if a.what == "theta-scan":
        source = a.source or "theta_scan.csv"
        path = a.out_path or os.path.splitext(source)[0] + ".svg"
        plotting.plot_theta_scan(read_theta_scan(source), path)
        printer.display_written(path, "figure")
        return

    if a.what == "distribution":
        _plot_distribution(a, settings, printer)
        return

    library = _library(a.library or settings.library)
    if a.what == "orbits":
        path = a.out_path or "orbits.svg"
        plotting.plot_orbits(library, settings.params, path)
    else:
        w = load_weights(a.weights) if a.weights else None
        size = w.size if w else len(library)
        library = library.prefix(size)
        if a.what == "weights":
            if w is None:
                raise UsageError("plot --what weights needs --weights")
            path = a.out_path or "weights.svg"
            plotting.plot_weight_vs_lambda(
                w.w, [o.floquet_exponent for o in library], path, label=w.method
            )
        else:
            path = a.out_path or "density.svg"
            measures = orbit_measures(library.orbits, settings.params)
            plotting.plot_density_slice(
                measures, settings.theta, path, weights=None if w is None else w.w
            )
    printer.display_written(path, "figure")


COMMANDS: dict[str, Callable[[argparse.Namespace, Settings, OutputPrinter], None]] = {
    "find-orbits": _find_orbits,
    "snippets": _snippets,
    "theta-scan": _theta_scan,
    "build-system": _build_system,
    "weights": _weights,
    "estimate": _estimate,
    "lyapunov": _lyapunov,
    "sweep": _sweep,
    "plot": _plot,
}


def _log_file(a: argparse.Namespace, settings: Settings) -> str | None:
    out = getattr(a, "out_path", None)
    if a.verb == "find-orbits":
        out = out or settings.library
    elif a.verb == "sweep":
        out = settings.out
    return out + ".log" if out else None


def main(
    argv: Sequence[str] | None = None,
    *,
    stdout: IO[str] | None = None,
    stderr: IO[str] | None = None,
) -> int:
    """
    Run one command. Returns the exit status: 0 on success, 1 for usage and
    configuration errors, 2 when a computation fails.
    """
    err = stderr if stderr is not None else sys.stderr
    handlers: list[logging.Handler] = []
    try:
        a = create_parser().parse_args(argv)
        settings = _settings(a)
        style = get_style(color="NO_COLOR" not in os.environ)
        handlers = configure_logging(
            a.verbose - a.quiet,
            style=style,
            stream=stderr,
            log_file=_log_file(a, settings),
        )
        logger.info(
            "user settings file %s, seed=%d, jobs=%d",
            get_config_file(),
            settings.seed,
            settings.jobs,
        )
        COMMANDS[a.verb](a, settings, OutputPrinter(style=style, stream=stdout))
    except (ConfigError, OSError) as e:
        code = e.code if isinstance(e, ConfigError) else "io"
        print(f"ERROR {code}: {e}", file=err)
        return 1
    except ChaosWeightsError as e:
        print(f"ERROR {e.code}: {e}", file=err)
        missing = getattr(e, "missing", None)
        if missing:
            print(f"missing words: {' '.join(missing)}", file=err)
        return 2
    finally:
        root = logging.getLogger("chaosweights")
        for handler in handlers:
            root.removeHandler(handler)
            handler.close()
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
