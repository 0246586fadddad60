"""
Lorenz-1963 dynamics: vector field, Jacobian, trajectory and tangent-space
integration, and Lyapunov exponents by the Benettin method.

::

    from chaosweights.dynamics import Params, integrate
    traj = integrate(np.array([1.0, 1.0, 1.0]), Params(), t_span=10.0, dt_out=0.01)
"""

from __future__ import annotations

import logging
import math
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator

import numba
import numpy as np
import numpy.typing as npt

from ._dopri import STATUS_OK, make_integrator, make_tangent_rhs
from .errors import IntegrationError, PreconditionError
from .utils import seed_stream

__all__ = [
    "Params",
    "State",
    "Trajectory",
    "TangentBundle",
    "System",
    "Lorenz63",
    "get_system",
    "vector_field",
    "jacobian",
    "integrate",
    "flow",
    "integrate_with_tangent",
    "attractor_point",
    "lyapunov_benettin",
    "lyapunov_spectrum_from_leading",
    "mirror",
    "DEFAULT_RTOL",
    "DEFAULT_ATOL",
]

logger = logging.getLogger(__name__)

State = npt.NDArray[np.float64]

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-10

# Initial conditions are (1, 1, 1) plus uniform noise in this box, followed
# by a transient of this duration.
TRANSIENT = 25.0
INITIAL_NOISE = 5.0


@dataclass(frozen=True)
class Params:
    """
    Lorenz-1963 parameters. Defaults are the canonical chaotic values.
    """

    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0

    def __post_init__(self) -> None:
        for name in ("sigma", "rho", "beta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise PreconditionError(f"{name} must be strictly positive, got {value}")

    def as_array(self) -> npt.NDArray[np.float64]:
        return np.array([self.sigma, self.rho, self.beta], dtype=np.float64)

    @property
    def divergence(self) -> float:
        "Constant trace of the Jacobian, -(sigma + 1 + beta)."
        return -(self.sigma + 1.0 + self.beta)


@dataclass
class Trajectory:
    """
    Uniformly sampled trajectory segment.

    :param states: ``(n, 3)`` array of states.
    :param dt: Sample spacing.
    :param t0: Time of the first sample.
    """

    states: npt.NDArray[np.float64]
    dt: float
    t0: float = 0.0

    def __post_init__(self) -> None:
        self.states = np.atleast_2d(np.asarray(self.states, dtype=np.float64))
        if len(self.states) < 1:
            raise PreconditionError("a trajectory needs at least one sample")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def times(self) -> npt.NDArray[np.float64]:
        return self.t0 + self.dt * np.arange(len(self.states))

    @property
    def duration(self) -> float:
        return self.dt * (len(self.states) - 1)

    @property
    def samples(self) -> Iterator[tuple[float, State]]:
        return zip(self.times, self.states)

    def head(self, n: int) -> Trajectory:
        "First ``n`` samples."
        return Trajectory(self.states[:n], self.dt, self.t0)


@dataclass
class TangentBundle:
    """
    Final state of a tangent integration together with the linearized flow
    map (the monodromy matrix when integrated over one period).
    """

    state: State
    deviation: npt.NDArray[np.float64]


class System(metaclass=ABCMeta):
    """
    Base class for a smooth autonomous flow with a discrete symmetry.

    Subclasses provide jitted kernels; the compiled integrators are created
    lazily and shared by all instances of a class.
    """

    dimension: int = 3

    @property
    @abstractmethod
    def params_array(self) -> npt.NDArray[np.float64]:
        "Parameters passed to the jitted kernels."

    @staticmethod
    @abstractmethod
    def rhs_kernel() -> Callable[..., None]:
        "Jitted ``rhs(y, params, out)``."

    @staticmethod
    @abstractmethod
    def jacobian_kernel() -> Callable[..., None]:
        "Jitted ``jac(y, params, out)``."

    @abstractmethod
    def symmetry(self, states: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        "Image of the given states under the discrete symmetry."

    @abstractmethod
    def divergence(self, state: State) -> float:
        "Trace of the Jacobian."

    def vector_field(self, state: State) -> State:
        out = np.empty(self.dimension)
        self.rhs_kernel()(np.asarray(state, dtype=np.float64), self.params_array, out)
        return out

    def jacobian(self, state: State) -> npt.NDArray[np.float64]:
        out = np.empty((self.dimension, self.dimension))
        self.jacobian_kernel()(
            np.asarray(state, dtype=np.float64), self.params_array, out
        )
        return out

    @classmethod
    def _integrator(cls) -> Callable[..., tuple]:
        return _compiled(cls, tangent=False)

    @classmethod
    def _tangent_integrator(cls) -> Callable[..., tuple]:
        return _compiled(cls, tangent=True)


@lru_cache(maxsize=None)
def _compiled(cls: type[System], tangent: bool) -> Callable[..., tuple]:
    if tangent:
        rhs = make_tangent_rhs(cls.rhs_kernel(), cls.jacobian_kernel(), cls.dimension)
        return make_integrator(rhs)
    return make_integrator(cls.rhs_kernel())


@numba.njit(cache=True)
def _lorenz_rhs(y, params, out):
    sigma, rho, beta = params[0], params[1], params[2]
    out[0] = sigma * (y[1] - y[0])
    out[1] = y[0] * (rho - y[2]) - y[1]
    out[2] = y[0] * y[1] - beta * y[2]


@numba.njit(cache=True)
def _lorenz_jacobian(y, params, out):
    sigma, rho, beta = params[0], params[1], params[2]
    out[0, 0] = -sigma
    out[0, 1] = sigma
    out[0, 2] = 0.0
    out[1, 0] = rho - y[2]
    out[1, 1] = -1.0
    out[1, 2] = -y[0]
    out[2, 0] = y[1]
    out[2, 1] = y[0]
    out[2, 2] = -beta


class Lorenz63(System):
    """
    The Lorenz (1963) convection model.
    """

    def __init__(self, params: Params | None = None) -> None:
        self.params = params or Params()
        self._params_array = self.params.as_array()

    @property
    def params_array(self) -> npt.NDArray[np.float64]:
        return self._params_array

    @staticmethod
    def rhs_kernel() -> Callable[..., None]:
        return _lorenz_rhs

    @staticmethod
    def jacobian_kernel() -> Callable[..., None]:
        return _lorenz_jacobian

    def symmetry(self, states: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return mirror(states)

    def divergence(self, state: State) -> float:
        return self.params.divergence

    def equilibria(self) -> list[State]:
        "The origin and the two wing centres C+ and C-."
        p = self.params
        r = math.sqrt(p.beta * (p.rho - 1.0))
        return [
            np.zeros(3),
            np.array([r, r, p.rho - 1.0]),
            np.array([-r, -r, p.rho - 1.0]),
        ]


@lru_cache(maxsize=16)
def get_system(p: Params) -> Lorenz63:
    return Lorenz63(p)


def mirror(states: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """
    Apply the symmetry ``(x, y, z) -> (-x, -y, z)`` to one or many states.
    """
    out = np.array(states, dtype=np.float64, copy=True)
    out[..., 0] *= -1.0
    out[..., 1] *= -1.0
    return out


def vector_field(s: State, p: Params) -> State:
    return get_system(p).vector_field(s)


def jacobian(s: State, p: Params) -> npt.NDArray[np.float64]:
    return get_system(p).jacobian(s)


def _max_steps(t_span: float) -> int:
    return max(1_000_000, int(t_span * 20_000))


def _check_status(status: int, what: str, t_span: float) -> None:
    if status != STATUS_OK:
        reason = {
            1: "step size underflow",
            2: "too many steps",
            3: "non-finite state",
        }.get(status, f"status {status}")
        raise IntegrationError(f"{what} over {t_span:g} time units failed: {reason}")


def integrate(
    s0: State,
    p: Params,
    t_span: float,
    dt_out: float,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Trajectory:
    """
    Integrate from ``s0`` and sample the solution every ``dt_out`` time units.

    :param t_span: Duration. ``0`` returns the single sample ``s0``.
    :param dt_out: Output spacing. Internal steps are adaptive.
    """
    if t_span < 0 or dt_out <= 0:
        raise PreconditionError("t_span must be >= 0 and dt_out > 0")
    s0 = np.asarray(s0, dtype=np.float64)
    if not np.all(np.isfinite(s0)):
        raise PreconditionError("initial state must be finite")
    if t_span == 0:
        return Trajectory(s0[None, :].copy(), dt_out)

    system = get_system(p)
    samples, _, _, status, n_steps = system._integrator()(
        s0.copy(),
        system.params_array,
        float(t_span),
        float(dt_out),
        float(rtol),
        float(atol),
        0.0,
        _max_steps(t_span),
    )
    _check_status(status, "integration", t_span)
    logger.debug("integrated %g time units in %d steps", t_span, n_steps)
    return Trajectory(samples, dt_out)


def flow(
    s0: State,
    p: Params,
    t_span: float,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> State:
    """
    End point of the flow, without storing intermediate samples.
    """
    s0 = np.asarray(s0, dtype=np.float64)
    if t_span == 0:
        return s0.copy()
    system = get_system(p)
    _, y_end, _, status, _ = system._integrator()(
        s0.copy(),
        system.params_array,
        float(t_span),
        -1.0,
        float(rtol),
        float(atol),
        0.0,
        _max_steps(t_span),
    )
    _check_status(status, "integration", t_span)
    return y_end.copy()


def integrate_with_tangent(
    s0: State,
    p: Params,
    t_span: float,
    *,
    deviation: npt.NDArray[np.float64] | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> TangentBundle:
    """
    Integrate the state jointly with its 3x3 deviation matrix.

    :param deviation: Initial deviation matrix; the identity by default.
    """
    if t_span < 0:
        raise PreconditionError("t_span must be >= 0")
    s0 = np.asarray(s0, dtype=np.float64)
    m0 = np.eye(3) if deviation is None else np.asarray(deviation, dtype=np.float64)
    if t_span == 0:
        return TangentBundle(s0.copy(), m0.copy())

    system = get_system(p)
    y0 = np.concatenate([s0, m0.ravel()])
    _, y_end, _, status, _ = system._tangent_integrator()(
        y0,
        system.params_array,
        float(t_span),
        -1.0,
        float(rtol),
        float(atol),
        0.0,
        _max_steps(t_span),
    )
    _check_status(status, "tangent integration", t_span)
    return TangentBundle(y_end[:3].copy(), y_end[3:].reshape(3, 3).copy())


def attractor_point(
    p: Params,
    rng: np.random.Generator,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> State:
    """
    A point on the attractor: perturb (1, 1, 1) with uniform noise and
    discard a transient.
    """
    s0 = np.ones(3) + rng.uniform(-INITIAL_NOISE, INITIAL_NOISE, size=3)
    return flow(s0, p, TRANSIENT, rtol=rtol, atol=atol)


def lyapunov_benettin(
    p: Params,
    t_total: float,
    t_renorm: float = 1.0,
    seed: int = 0,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-8,
) -> tuple[float, float, float]:
    """
    Lyapunov spectrum by repeated QR re-orthonormalization of a tangent
    frame, sorted in descending order.

    :param t_total: Averaging time after the transient.
    :param t_renorm: Time between re-orthonormalizations.
    """
    if not (t_renorm > 0 and t_total >= t_renorm):
        raise PreconditionError("need t_total >= t_renorm > 0")

    rng = seed_stream(seed, "benettin")
    x = attractor_point(p, rng, rtol=rtol, atol=atol)
    q = np.eye(3)
    log_sums = np.zeros(3)
    n_renorm = int(round(t_total / t_renorm))

    system = get_system(p)
    integrator = system._tangent_integrator()
    params = system.params_array
    h = 0.0
    for _ in range(n_renorm):
        y0 = np.concatenate([x, q.ravel()])
        _, y_end, h, status, _ = integrator(
            y0, params, float(t_renorm), -1.0, rtol, atol, h, _max_steps(t_renorm)
        )
        _check_status(status, "tangent integration", t_renorm)
        x = y_end[:3].copy()
        q, r = np.linalg.qr(y_end[3:].reshape(3, 3))
        log_sums += np.log(np.abs(np.diag(r)))

    exponents = sorted((log_sums / (n_renorm * t_renorm)).tolist(), reverse=True)
    logger.info(
        "Benettin exponents over %g time units: %.5f %.5f %.5f",
        n_renorm * t_renorm,
        *exponents,
    )
    return exponents[0], exponents[1], exponents[2]


def lyapunov_spectrum_from_leading(lam: float, p: Params) -> tuple[float, float, float]:
    """
    Full Lorenz spectrum implied by the leading exponent: the flow direction
    gives 0 and the constant divergence fixes the third exponent.
    """
    return lam, 0.0, p.divergence - lam
