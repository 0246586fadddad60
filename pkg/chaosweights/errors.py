"""
Exceptions raised by chaosweights.

Every exception carries a short, stable ``code`` that the command line
prints as ``ERROR <code>: <message>``.
"""

from __future__ import annotations

from typing import Sequence

__all__ = [
    "ChaosWeightsError",
    "PreconditionError",
    "ConfigError",
    "IntegrationError",
    "RefinementError",
    "DegenerateSolutionError",
    "AmbiguousSymbolError",
    "NonPrimitiveOrbitError",
    "IncompleteLibraryError",
    "FileFormatError",
    "VersionMismatchError",
    "SingularSystemError",
    "ConvergenceError",
    "UnsupportedInputError",
]


class ChaosWeightsError(Exception):
    """
    Base class for all errors raised by this package.
    """

    code = "error"


class PreconditionError(ChaosWeightsError, ValueError):
    code = "precondition"


class ConfigError(ChaosWeightsError):
    """
    Invalid configuration file, flag or setting. (Usage error.)
    """

    code = "config"


class IntegrationError(ChaosWeightsError):
    """
    The adaptive integrator could not advance (step-size underflow, too many
    steps or a non-finite state).
    """

    code = "integration"


class RefinementError(ChaosWeightsError):
    code = "refinement"


class DegenerateSolutionError(ChaosWeightsError):
    """
    A solver converged to something that is not an admissible answer: an
    equilibrium instead of a periodic orbit, or an all-zero weight vector.
    """

    code = "degenerate"


class AmbiguousSymbolError(ChaosWeightsError):
    code = "ambiguous-symbol"


class NonPrimitiveOrbitError(ChaosWeightsError):
    code = "non-primitive"


class IncompleteLibraryError(ChaosWeightsError):
    """
    The orbit search budget was exhausted before every word was found.

    :param missing: Canonical words that are still missing.
    """

    code = "incomplete-library"

    def __init__(self, message: str, missing: Sequence[str] = ()) -> None:
        super().__init__(message)
        self.missing = list(missing)


class FileFormatError(ChaosWeightsError):
    """
    Malformed data file.

    :param lineno: 1-based line number where parsing failed, if known.
    """

    code = "parse"

    def __init__(self, message: str, lineno: int | None = None) -> None:
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class VersionMismatchError(FileFormatError):
    code = "version"


class SingularSystemError(ChaosWeightsError):
    code = "singular"


class ConvergenceError(ChaosWeightsError):
    code = "no-convergence"


class UnsupportedInputError(ChaosWeightsError):
    code = "unsupported"
