"""Transform values by integrating the transformed PDE along its characteristic.

The transformed equation ``w_t + s (a t^(2v-1) s - b) w_s = -c s w`` is
first order, so along ``ds/dmu = s (a mu^(2v-1) s - b)`` it reduces to an ODE.
In the reciprocal variable ``z = 1/s`` the characteristic is linear,
``dz/dmu = b z - a mu^(2v-1)``, and ``d log w / dmu = -c / z``. Changing the
clock to ``tau = mu^v`` removes the ``mu^(2v-1)`` singularity at the origin.
Integration runs backward from ``(t, s)`` to ``mu = 0`` where ``w = pi(1/z)``.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import DomainError, QuadratureError
from ..laplace_domain import InitialDistribution, log_pi_eval
from ..params import FpkParams


def _rhs(tau, y, params):
    v = params.v
    dmu = tau ** (1.0 / v - 1.0) / v
    z = y[0]
    dz = params.b * z * dmu - (params.a / v) * tau
    dlog = -params.c / z * dmu
    return [dz, dlog]


def characteristic_omega(t, s, init: InitialDistribution, params: FpkParams,
                         rtol=1e-12, atol=1e-14):
    """Reflecting-mode transform value at ``(t, s)`` from the characteristic ODE.

    Parameters
    ----------
    s : complex
        Laplace point; the ODE is integrated in complex arithmetic.

    Returns
    -------
    complex
    """
    if not t >= 0:
        raise DomainError("t must be non-negative")
    s = complex(s)
    if s == 0:
        raise DomainError("s must be non-zero")
    if t == 0:
        return complex(np.exp(log_pi_eval(init, s)))
    tau_end = t ** params.v
    sol = solve_ivp(_rhs, (tau_end, 0.0), np.array([1.0 / s, 0.0], dtype=complex),
                    method="DOP853", rtol=rtol, atol=atol, args=(params,))
    if not sol.success:
        raise QuadratureError(f"characteristic integration failed: {sol.message}", np.nan)
    z0, log_w = sol.y[0, -1], sol.y[1, -1]
    # log w(t) = log w(0) + int_0^t (-c/z) dmu; the ODE ran backward, so subtract
    return complex(np.exp(log_pi_eval(init, 1.0 / z0) - log_w))
