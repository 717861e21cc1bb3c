"""Pure-Python/numpy kernels; reference path and fallback for the compiled core.

Both implementations share one contract:

``rhs(u, p, t, params) -> ndarray``
    Right-hand side of the FK equations of motion for a (p, q)-periodic lift.
``integrate(u0, p, t0, sample_times, params, dt_max, tol, dt0)``
    Dormand-Prince 5(4) with absolute max-norm local error control. Returns
    ``(states, dt_next, n_accepted, n_rejected)`` with ``states[i]`` the lift at
    ``sample_times[i]``. Raises :class:`StepSizeUnderflow` below ``DT_MIN``.
"""
from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi
DT_MIN = 1e-12


class StepSizeUnderflow(RuntimeError):
    """Adaptive step control drove dt below DT_MIN."""


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
# difference between 5th and embedded 4th order weights
_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


def _trig_d1(x, cos, sin):
    out = np.zeros_like(x)
    for i in range(len(cos)):
        w = TWO_PI * (i + 1)
        out += w * (sin[i] * np.cos(w * x) - cos[i] * np.sin(w * x))
    return out


def rhs(u, p, t, params):
    mu, dpoly, wc, ws, k, vc, vs, fdc, fac, nu0 = params
    d = np.empty_like(u)
    d[:-1] = u[1:] - u[:-1]
    d[-1] = u[0] + p - u[-1]
    x = d - mu
    dw = np.full_like(d, dpoly[-1])
    for c in dpoly[-2::-1]:
        dw = dw * x + c
    if len(wc):
        dw += _trig_d1(d, wc, ws)
    f = fdc
    if fac != 0.0:
        f += fac * math.sin(TWO_PI * nu0 * t)
    out = dw - np.roll(dw, 1) + f
    if k != 0.0 and len(vc):
        out += k * _trig_d1(u, vc, vs)
    return out


def integrate(u0, p, t0, sample_times, params, dt_max, tol, dt0):
    y = np.array(u0, dtype=float)
    sample_times = np.asarray(sample_times, dtype=float)
    states = np.empty((sample_times.size, y.size))
    t = float(t0)
    dt = min(float(dt0), dt_max)
    n_acc = n_rej = 0
    k1 = rhs(y, p, t, params)
    ks = [None] * 7
    for i, t_out in enumerate(sample_times):
        while t < t_out:
            last = False
            h = dt
            if t + h >= t_out:
                h = t_out - t
                last = True
            ks[0] = k1
            for s in range(1, 7):
                acc = y.copy()
                for a, kk in zip(_A[s], ks):
                    if a != 0.0:
                        acc += h * a * kk
                ks[s] = rhs(acc, p, t + _C[s] * h, params)
                if s == 6:
                    y_new = acc
            err_vec = np.zeros_like(y)
            for e, kk in zip(_E, ks):
                if e != 0.0:
                    err_vec += e * kk
            err = h * float(np.max(np.abs(err_vec)))
            if err <= tol:
                t = t_out if last else t + h
                y = y_new
                k1 = ks[6]
                n_acc += 1
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * (tol / err) ** 0.2))
                if not last or fac < 1.0:
                    dt = min(dt_max, h * fac)
            else:
                n_rej += 1
                dt = h * max(0.2, 0.9 * (tol / err) ** 0.2)
                if dt < DT_MIN:
                    raise StepSizeUnderflow(f"dt={dt:.3e} at t={t:.6g}")
        states[i] = y
    return states, dt, n_acc, n_rej


def _rk4(y, p, t, h, params):
    k1 = rhs(y, p, t, params)
    k2 = rhs(y + 0.5 * h * k1, p, t + 0.5 * h, params)
    k3 = rhs(y + 0.5 * h * k2, p, t + 0.5 * h, params)
    k4 = rhs(y + h * k3, p, t + h, params)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_doubling(u0, p, t0, sample_times, params, dt_max, tol, dt0):
    """Classical RK4 with step-doubling error control; same contract as ``integrate``.

    Slower than the embedded pair (11 evaluations per step) but independent of it,
    so it serves as a fallback and a cross-check.
    """
    y = np.array(u0, dtype=float)
    sample_times = np.asarray(sample_times, dtype=float)
    states = np.empty((sample_times.size, y.size))
    t = float(t0)
    dt = min(float(dt0), dt_max)
    n_acc = n_rej = 0
    for i, t_out in enumerate(sample_times):
        while t < t_out:
            last = False
            h = dt
            if t + h >= t_out:
                h = t_out - t
                last = True
            full = _rk4(y, p, t, h, params)
            half = _rk4(_rk4(y, p, t, 0.5 * h, params), p, t + 0.5 * h, 0.5 * h, params)
            diff = (half - full) / 15.0
            err = float(np.max(np.abs(diff)))
            if err <= tol:
                t = t_out if last else t + h
                y = half + diff
                n_acc += 1
                fac = 4.0 if err == 0.0 else min(4.0, max(0.2, 0.9 * (tol / err) ** 0.2))
                if not last or fac < 1.0:
                    dt = min(dt_max, h * fac)
            else:
                n_rej += 1
                dt = h * max(0.2, 0.9 * (tol / err) ** 0.2)
                if dt < DT_MIN:
                    raise StepSizeUnderflow(f"dt={dt:.3e} at t={t:.6g}")
        states[i] = y
    return states, dt, n_acc, n_rej
