"""
Adaptive Dormand-Prince 5(4) integration compiled with numba.

The integrator is generated per right-hand side by :func:`make_integrator`.
A right-hand side is a jitted function ``rhs(y, params, out)`` that writes
the derivative of ``y`` into ``out``. Steps are accepted on the embedded
4th order error estimate; output at a fixed spacing is produced with the
4th order continuous extension of Hairer, Norsett & Wanner (``contd5``).
"""

from __future__ import annotations

from typing import Callable

import numba
import numpy as np

__all__ = [
    "STATUS_OK",
    "STATUS_UNDERFLOW",
    "STATUS_MAX_STEPS",
    "STATUS_NOT_FINITE",
    "make_integrator",
    "make_tangent_rhs",
]

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAX_STEPS = 2
STATUS_NOT_FINITE = 3

# Butcher tableau.
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0

# Difference between the 5th and the embedded 4th order weights.
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0

# Dense output.
D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0


def make_integrator(rhs: Callable[..., None]) -> Callable[..., tuple]:
    """
    Compile an integrator for the given jitted right-hand side.

    The returned function has the signature::

        integrate(y0, params, t_span, dt_out, rtol, atol, h0, max_steps)
            -> (samples, y_end, h_next, status, n_steps)

    ``samples[k]`` is the state at time ``k * dt_out`` for every such time in
    ``[0, t_span]``. With ``dt_out <= 0`` only the initial state is stored.
    ``h0 <= 0`` selects a default first step.
    """

    @numba.njit
    def integrate(y0, params, t_span, dt_out, rtol, atol, h0, max_steps):
        n = y0.shape[0]
        if dt_out > 0.0:
            n_out = int(np.floor(t_span / dt_out + 1e-9)) + 1
        else:
            n_out = 1
        samples = np.empty((n_out, n))
        samples[0, :] = y0

        y = y0.copy()
        y_new = np.empty(n)
        y_stage = np.empty(n)
        k1 = np.empty(n)
        k2 = np.empty(n)
        k3 = np.empty(n)
        k4 = np.empty(n)
        k5 = np.empty(n)
        k6 = np.empty(n)
        k7 = np.empty(n)

        status = 0
        n_steps = 0
        k_out = 1
        t = 0.0
        h = h0
        if h <= 0.0:
            h = 1e-3
        if h > t_span:
            h = t_span

        rhs(y, params, k1)

        while t < t_span:
            last = False
            if t + h >= t_span:
                h = t_span - t
                last = True

            for i in range(n):
                y_stage[i] = y[i] + h * A21 * k1[i]
            rhs(y_stage, params, k2)
            for i in range(n):
                y_stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
            rhs(y_stage, params, k3)
            for i in range(n):
                y_stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            rhs(y_stage, params, k4)
            for i in range(n):
                y_stage[i] = y[i] + h * (
                    A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]
                )
            rhs(y_stage, params, k5)
            for i in range(n):
                y_stage[i] = y[i] + h * (
                    A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]
                )
            rhs(y_stage, params, k6)
            for i in range(n):
                y_new[i] = y[i] + h * (
                    B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]
                )
            rhs(y_new, params, k7)

            err = 0.0
            for i in range(n):
                e = h * (
                    E1 * k1[i]
                    + E3 * k3[i]
                    + E4 * k4[i]
                    + E5 * k5[i]
                    + E6 * k6[i]
                    + E7 * k7[i]
                )
                sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
                err += (e / sc) ** 2
            err = np.sqrt(err / n)

            n_steps += 1
            if n_steps > max_steps:
                status = 2
                break

            if not np.isfinite(err):
                h *= FAC_MIN
                if h < 1e-14 * max(1.0, abs(t)):
                    status = 3
                    break
                continue

            if err <= 1.0:
                # Dense output for every output time inside (t, t + h].
                t_end = t_span if last else t + h
                while k_out < n_out and k_out * dt_out <= t_end + 1e-9 * dt_out:
                    theta = (k_out * dt_out - t) / h
                    if theta > 1.0:
                        theta = 1.0
                    theta1 = 1.0 - theta
                    for i in range(n):
                        ydiff = y_new[i] - y[i]
                        bspl = h * k1[i] - ydiff
                        r5 = h * (
                            D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]
                        )
                        samples[k_out, i] = y[i] + theta * (
                            ydiff
                            + theta1
                            * (bspl + theta * ((ydiff - h * k7[i] - bspl) + theta1 * r5))
                        )
                    k_out += 1

                t = t_end
                for i in range(n):
                    y[i] = y_new[i]
                    k1[i] = k7[i]

                if err == 0.0:
                    fac = FAC_MAX
                else:
                    fac = min(FAC_MAX, max(FAC_MIN, SAFETY * err ** -0.2))
                h *= fac
            else:
                h *= max(FAC_MIN, SAFETY * err ** -0.2)

            if h < 1e-14 * max(1.0, abs(t)) and t < t_span:
                status = 1
                break

        # Output times that coincide with the end point up to round-off.
        while status == 0 and k_out < n_out:
            samples[k_out, :] = y
            k_out += 1

        return samples, y, h, status, n_steps

    return integrate


def make_tangent_rhs(rhs: Callable[..., None], jacobian: Callable[..., None], dim: int) -> Callable[..., None]:
    """
    Right-hand side of the joint state + deviation-matrix system.

    The extended state holds ``dim`` state components followed by the
    row-major ``dim x dim`` deviation matrix ``M`` with ``dM/dt = J(x) M``.
    """

    @numba.njit
    def tangent_rhs(y, params, out):
        rhs(y[:dim], params, out[:dim])
        jac = np.empty((dim, dim))
        jacobian(y[:dim], params, jac)
        for i in range(dim):
            for j in range(dim):
                acc = 0.0
                for k in range(dim):
                    acc += jac[i, k] * y[dim + k * dim + j]
                out[dim + i * dim + j] = acc

    return tangent_rhs
