"""Compiled RK4 for the DA field with the canonical bump.

Each point is integrated independently; once it leaves the support of the
bump for good (``|u| > delta`` forward, ``|s| > delta`` backward) the rest
of its orbit is the linear saddle in closed form.
"""

import math

import numpy as np
from numba import njit

_SQRT2 = math.sqrt(2.0)


@njit(cache=True)
def _alpha(x):
    if abs(x) >= 1.0:
        return 0.0, 0.0
    d = 1.0 - x * x
    a = _SQRT2 * math.exp(1.0 - 1.0 / d)
    return a, -a * 2.0 * x / (d * d)


@njit(cache=True)
def _rhs(s, p, q, u, et, delta):
    a_s, ap_s = _alpha(s / delta)
    a_u, ap_u = _alpha(u / delta)
    b = a_s * a_u
    sig = -(b - 1.0 + ap_s * a_u / delta * s)
    c = -a_s * ap_u / delta * s
    return (b - 1.0) * s, -sig * p, -sig * q - c * et


@njit(cache=True)
def rk4_canonical(s0, u0, delta, dt, chk_steps):
    """Returns ``(S, P, Q)`` of shape ``(len(chk_steps), n)`` at the checkpoint step counts."""
    n = s0.shape[0]
    m = chk_steps.shape[0]
    S = np.empty((m, n))
    P = np.empty((m, n))
    Q = np.empty((m, n))
    last = chk_steps[m - 1]
    for i in range(n):
        s, p, q = s0[i], 1.0, 0.0
        uu = u0[i]
        k = 0
        step = 0
        while step < last:
            tt = step * dt
            u = uu * math.exp(tt)
            if (dt > 0 and abs(u) > delta) or (dt < 0 and abs(s) > delta):
                break
            um = uu * math.exp(tt + 0.5 * dt)
            ub = uu * math.exp(tt + dt)
            e0, em, eb = math.exp(tt), math.exp(tt + 0.5 * dt), math.exp(tt + dt)
            a1, b1, c1 = _rhs(s, p, q, u, e0, delta)
            a2, b2, c2 = _rhs(s + 0.5 * dt * a1, p + 0.5 * dt * b1, q + 0.5 * dt * c1, um, em, delta)
            a3, b3, c3 = _rhs(s + 0.5 * dt * a2, p + 0.5 * dt * b2, q + 0.5 * dt * c2, um, em, delta)
            a4, b4, c4 = _rhs(s + dt * a3, p + dt * b3, q + dt * c3, ub, eb, delta)
            s += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            p += dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            q += dt / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
            step += 1
            while k < m and chk_steps[k] == step:
                S[k, i], P[k, i], Q[k, i] = s, p, q
                k += 1
        # closed-form linear tail from the exit step
        while k < m:
            f = math.exp(-(chk_steps[k] - step) * dt)
            S[k, i], P[k, i], Q[k, i] = s * f, p * f, q * f
            k += 1
    return S, P, Q
