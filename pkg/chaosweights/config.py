"""
Settings and their sources.

Values are layered, later sources winning: built-in defaults, the per-user
file ``config.cfg`` (in ``$CHAOSWEIGHTS_CONFIG_HOME`` or the platform config
directory), a file given with ``--config``, the ``--paper-scale`` preset and
finally explicit command line flags.

A settings file holds ``key = value`` lines; ``#`` starts a comment and
list values are comma separated::

    # desk.cfg
    lmax = 6
    samples = 100, 1000, 10000, 100000
    methods = lsw, nnls, markov, uniform, pot
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping

import appdirs

from .dynamics import Params
from .errors import ConfigError, PreconditionError
from .experiments import DEFAULT_METHODS, ExperimentConfig
from .library import SearchBudget

__all__ = [
    "Settings",
    "SETTING_NAMES",
    "FULL_SCALE",
    "get_config_file",
    "read_config_file",
    "load_settings",
]

logger = logging.getLogger(__name__)

CONFIG_HOME_VARIABLE = "CHAOSWEIGHTS_CONFIG_HOME"


@dataclass(frozen=True)
class Settings:
    # Randomness and workers.
    seed: int = 0
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)

    # Lorenz parameters.
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0

    # Chaotic sampling.
    dt: float = 2.0
    chaotic_rtol: float = 1e-8

    # Kernel and weights.
    theta: float = 100.0
    alpha: float = 1e-10
    prefactor: bool = False
    theta_grid: str = "1e-2:1e6:log25"

    # Orbit search.
    lmax: int = 6
    search_runs: int = 8
    search_duration: float = 2000.0
    search_refinements: int = 4000

    # Sweep.
    methods: tuple[str, ...] = DEFAULT_METHODS
    kinds: tuple[str, ...] = ("orbit",)
    sizes: tuple[int, ...] = ()
    permutations: int = 32
    seeds: int = 16
    samples: tuple[int, ...] = (100, 1_000, 10_000, 100_000)
    truth_samples: int = 0
    lyapunov_time: float = 1e4

    # Files.
    library: str = "library.txt"
    snippets: str = ""
    out: str = "results.csv"

    @property
    def params(self) -> Params:
        try:
            return Params(self.sigma, self.rho, self.beta)
        except PreconditionError as e:
            raise ConfigError(str(e))

    def search_budget(self) -> SearchBudget:
        return SearchBudget(
            max_runs=self.search_runs,
            run_duration=self.search_duration,
            max_refinements=self.search_refinements,
            seed=self.seed,
            jobs=self.jobs,
        )

    def experiment_config(self) -> ExperimentConfig:
        try:
            return ExperimentConfig(
                methods=self.methods,
                kinds=self.kinds,
                sizes=self.sizes,
                permutations=self.permutations,
                seeds=self.seeds,
                sample_counts=self.samples,
                dt=self.dt,
                theta=self.theta,
                alpha=self.alpha,
                library_path=self.library,
                snippet_path=self.snippets or None,
                output_path=self.out,
                master_seed=self.seed,
                params=self.params,
                chaotic_rtol=self.chaotic_rtol,
                lyapunov_time=self.lyapunov_time,
                truth_samples=self.truth_samples or None,
                jobs=self.jobs,
            )
        except PreconditionError as e:
            raise ConfigError(str(e))

    def updated(self, values: Mapping[str, Any], source: str = "flags") -> Settings:
        """
        Copy with ``values`` applied. Strings are converted to the type of the
        field; ``None`` values are ignored.
        """
        known = {f.name: getattr(self, f.name) for f in fields(self)}
        changes = {}
        for key, value in values.items():
            if value is None:
                continue
            if key not in known:
                raise ConfigError(f"{source}: unknown setting {key!r}")
            changes[key] = _convert(key, known[key], value, source)
        return replace(self, **changes)


SETTING_NAMES = frozenset(f.name for f in fields(Settings))

# Overrides for the full-size experiments.
FULL_SCALE: dict[str, Any] = {
    "seeds": 256,
    "permutations": 256,
    "samples": (100, 1_000, 10_000, 100_000, 1_000_000),
    "lyapunov_time": 1e5,
    "lmax": 9,
}


def _convert(key: str, default: Any, value: Any, source: str) -> Any:
    if not isinstance(value, str):
        return value
    text = value.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(text)
            return lowered in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(float(text)) if "e" in text.lower() else int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [item.strip() for item in text.split(",") if item.strip()]
            if key in ("sizes", "samples"):
                return tuple(int(float(item)) for item in items)
            return tuple(items)
    except ValueError:
        raise ConfigError(f"{source}: invalid value {text!r} for {key}")
    return text


def get_config_file() -> str:
    """
    Location of the per-user settings file.
    """
    config_dir = os.environ.get(
        CONFIG_HOME_VARIABLE, appdirs.user_config_dir("chaosweights")
    )
    return os.path.join(config_dir, "config.cfg")


def read_config_file(path: str) -> dict[str, str]:
    """
    Parse a ``key = value`` file.

    :raises ConfigError: on unreadable files and malformed lines.
    """
    try:
        with open(os.path.expanduser(path)) as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}")

    values: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.partition("#")[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}, line {lineno}: expected key = value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def load_settings(
    config_file: str | None = None,
    overrides: Mapping[str, Any] | None = None,
    *,
    full_scale: bool = False,
) -> Settings:
    settings = Settings()

    user_file = get_config_file()
    if os.path.isfile(user_file):
        settings = settings.updated(read_config_file(user_file), user_file)
        logger.debug("applied %s", user_file)

    if config_file:
        settings = settings.updated(read_config_file(config_file), config_file)

    if full_scale:
        settings = settings.updated(FULL_SCALE, "--paper-scale")

    return settings.updated(overrides or {})
