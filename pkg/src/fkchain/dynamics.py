"""Gradient-flow integration, average sliding velocity, dynamic depinning, synchronization.

All trajectories are lifts: particle positions are never wrapped, so the
displacement of particle 0 over a window directly gives the sliding velocity.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _pykernels, kernels
from .errors import (BracketInvalid, IdenticalConfigurations, InsufficientSpan, NotConverged,
                     StepSizeUnderflow)
from .intersect import ZERO_RTOL, count_intersections
from .model import ModelError, ModelSpec, PeriodicConfiguration, as_fraction, translate

log = logging.getLogger(__name__)

__all__ = [
    "IntegratorSettings",
    "TrajectorySample",
    "VelocityEstimate",
    "SyncResult",
    "integrate",
    "evolve",
    "average_velocity",
    "is_sliding",
    "depinning_force_dynamic",
    "synchronization_check",
    "max_onsite_force",
]

V_THRESHOLD = 1e-4
_HALFWIDTH_FLOOR = 1e-7


@dataclass(frozen=True)
class IntegratorSettings:
    """Step control and sampling parameters.

    ``strobe_period`` is replaced by the forcing period ``1/nu0`` for AC models
    (see :meth:`resolved`), so AC samples always realize the time-one map of the
    forcing. ``method`` is ``"dopri5"`` (compiled when available) or
    ``"rk4-doubling"``; with ``fallback=True`` a step-size underflow in the
    embedded pair is retried once with step doubling.
    """

    dt_max: float = 0.05
    error_tol: float = 1e-8
    t_burn: float = 200.0
    t_measure: float = 2000.0
    strobe_period: float = 1.0
    max_extensions: int = 3
    method: str = "dopri5"
    backend: str | None = None
    fallback: bool = True

    def __post_init__(self):
        if not self.dt_max > 0 or not self.error_tol > 0 or not self.strobe_period > 0:
            raise ModelError("dt_max, error_tol and strobe_period must be > 0")
        if self.t_burn < 0 or not self.t_measure > 0:
            raise ModelError("t_burn must be >= 0 and t_measure > 0")
        if self.method not in ("dopri5", "rk4-doubling"):
            raise ModelError(f"unknown integration method {self.method!r}")

    def replace(self, **changes) -> "IntegratorSettings":
        return dataclasses.replace(self, **changes)

    def resolved(self, spec: ModelSpec) -> "IntegratorSettings":
        period = spec.forcing.period
        if period is None or math.isclose(self.strobe_period, float(period)):
            return self
        return self.replace(strobe_period=float(period))


@dataclass(frozen=True)
class TrajectorySample:
    """Stroboscopic record ``positions[i]`` = base lift at ``times[i]``."""

    times: np.ndarray
    positions: np.ndarray
    p: int

    def __len__(self):
        return self.times.size

    @property
    def q(self) -> int:
        return self.positions.shape[1]

    def state(self, i: int) -> PeriodicConfiguration:
        return PeriodicConfiguration(self.positions[i], self.p)

    @property
    def states(self) -> list[PeriodicConfiguration]:
        return [self.state(i) for i in range(len(self))]

    @property
    def displacement0(self) -> np.ndarray:
        """Continuous lift ``u_0(t)``."""
        return self.positions[:, 0]

    @property
    def final(self) -> PeriodicConfiguration:
        return self.state(-1)


@dataclass(frozen=True)
class VelocityEstimate:
    """Average velocity of particle 0 over the measurement window.

    ``confidence_halfwidth`` bounds the error from the bounded oscillation of
    ``u_0(t)`` about its mean drift; ``v_halves`` are the two half-window rates.
    """

    v: float
    confidence_halfwidth: float
    converged: bool
    t_measure: float = 0.0
    v_halves: tuple[float, float] = (0.0, 0.0)
    final_state: PeriodicConfiguration | None = None
    final_time: float = 0.0


@dataclass(frozen=True)
class SyncResult:
    synchronized: bool
    witness: tuple | None = None  # (m, n, s, time_index, site)
    n_checked: int = 0

    def __bool__(self):
        return self.synchronized


def _kernel(s: IntegratorSettings, method: str | None = None):
    method = method or s.method
    if method == "rk4-doubling":
        return _pykernels.integrate_doubling
    return kernels.get(s.backend).integrate


def _run(base, p, t0, times, spec, s, dt0=None):
    params = spec.kernel_params()
    dt0 = s.dt_max if dt0 is None else dt0
    try:
        out = _kernel(s)(base, p, t0, times, params, s.dt_max, s.error_tol, dt0)
    except StepSizeUnderflow:
        if not s.fallback or s.method == "rk4-doubling":
            raise
        log.warning("embedded pair underflowed; retrying with RK4 step doubling")
        out = _kernel(s, "rk4-doubling")(base, p, t0, times, params, s.dt_max, s.error_tol, dt0)
    return out[0], out[1]


def integrate(c0: PeriodicConfiguration, spec: ModelSpec, s: IntegratorSettings | None = None,
              t_span: float | None = None, t0: float = 0.0) -> TrajectorySample:
    """Integrate the equations of motion and sample stroboscopically.

    Samples are taken at ``t0 + i * strobe_period`` for ``0 <= i * strobe_period <= t_span``
    (the initial state is sample 0).

    Raises
    ------
    StepSizeUnderflow
        If step control drives dt below ``1e-12``.
    """
    s = (s or IntegratorSettings()).resolved(spec)
    if t_span is None:
        t_span = s.t_measure
    if not t_span > 0:
        raise ValueError("t_span must be > 0")
    n = int(math.floor(t_span / s.strobe_period + 1e-9))
    times = t0 + s.strobe_period * np.arange(n + 1)
    states, _ = _run(c0.base, c0.p, t0, times[1:], spec, s)
    positions = np.vstack([c0.base[None, :], states])
    return TrajectorySample(times, positions, c0.p)


def evolve(c0: PeriodicConfiguration, spec: ModelSpec, t: float,
           s: IntegratorSettings | None = None, t0: float = 0.0) -> PeriodicConfiguration:
    """State at time ``t0 + t``."""
    if t == 0:
        return c0
    s = s or IntegratorSettings()
    states, _ = _run(c0.base, c0.p, t0, np.array([t0 + t]), spec, s)
    return PeriodicConfiguration(states[-1], c0.p)


def _chord_estimate(t, x):
    """Half-window rates and the residual-based error bound of a sampled lift."""
    n = t.size - 1
    h = n // 2
    out = []
    for lo, hi in ((0, h), (h, n)):
        span = t[hi] - t[lo]
        rate = (x[hi] - x[lo]) / span
        resid = x[lo:hi + 1] - (x[lo] + rate * (t[lo:hi + 1] - t[lo]))
        out.append((rate, 2.0 * float(np.max(np.abs(resid))) / span))
    (v1, hw1), (v2, hw2) = out
    return v1, v2, hw1 + hw2 + _HALFWIDTH_FLOOR


def average_velocity(c0: PeriodicConfiguration, spec: ModelSpec,
                     s: IntegratorSettings | None = None, t0: float = 0.0) -> VelocityEstimate:
    """Asymptotic average velocity ``(u_0(t_b + T) - u_0(t_b)) / T``.

    The window is split in two halves. For a bounded oscillation about a steady
    drift each half-rate deviates from the drift by at most twice the largest
    chord residual over the half length, so the sum of those bounds is the
    confidence half-width and the two rates must agree within it. A failed test
    doubles ``T`` (treating the previous window as further burn-in) up to
    ``max_extensions`` times.

    Raises
    ------
    NotConverged
        With the last estimate attached as ``.estimate``.
    """
    s = (s or IntegratorSettings()).resolved(spec)
    strobe = s.strobe_period
    state, t = c0, t0
    dt = None
    if s.t_burn > 0:
        t_b = strobe * math.ceil(s.t_burn / strobe - 1e-9)
        st, dt = _run(state.base, state.p, t, np.array([t + t_b]), spec, s)
        state, t = PeriodicConfiguration(st[-1], state.p), t + t_b
    n = max(2, 2 * math.ceil(s.t_measure / (2 * strobe) - 1e-9))
    est = None
    for attempt in range(s.max_extensions + 1):
        times = t + strobe * np.arange(1, n + 1)
        st, dt = _run(state.base, state.p, t, times, spec, s, dt)
        ts = np.concatenate([[t], times])
        x = np.concatenate([[state.base[0]], st[:, 0]])
        v1, v2, hw = _chord_estimate(ts, x)
        T = ts[-1] - ts[0]
        final = PeriodicConfiguration(st[-1], state.p)
        est = VelocityEstimate(
            v=float((x[-1] - x[0]) / T),
            confidence_halfwidth=hw,
            converged=abs(v1 - v2) < hw,
            t_measure=float(T),
            v_halves=(float(v1), float(v2)),
            final_state=final,
            final_time=float(ts[-1]),
        )
        if est.converged:
            return est
        log.debug("velocity not converged at T=%g (v1=%g, v2=%g, hw=%g)", T, v1, v2, hw)
        state, t = final, float(ts[-1])
        n *= 2
    raise NotConverged(
        f"half-window rates differ by {abs(est.v_halves[0] - est.v_halves[1]):.3g} "
        f"> {est.confidence_halfwidth:.3g} after T={est.t_measure:g}", est)


def is_sliding(est: VelocityEstimate, v_threshold: float = V_THRESHOLD) -> bool:
    """Sliding only if converged and ``v - halfwidth > v_threshold``."""
    return bool(est.converged and est.v - est.confidence_halfwidth > v_threshold)


def max_onsite_force(spec: ModelSpec, n: int = 4096) -> float:
    """``max |V'|`` on a grid; no equilibrium of any type exists for ``|F_DC|`` above it."""
    x = np.arange(n) / n
    return float(np.max(np.abs(spec.dV(x))))


def _velocity_or_partial(c, spec, s):
    try:
        return average_velocity(c, spec, s)
    except NotConverged as exc:
        log.info("using unconverged estimate at F_DC=%g: %s", spec.forcing.F_DC, exc)
        return exc.estimate


def depinning_force_dynamic(spec_template: ModelSpec, rho, F_lo: float = 0.0,
                            F_hi: float | None = None, v_threshold: float = V_THRESHOLD,
                            tol: float = 1e-4, s: IntegratorSettings | None = None,
                            q: int | None = None) -> float:
    """Critical DC force from velocity measurements, by bisection.

    The first evaluation at each bracket end starts from the uniform configuration
    ``u_j = j p / q``; later evaluations warm-start from the previous final state.
    ``F_hi`` defaults to just above ``max |V'|``, where no equilibrium survives.

    Raises
    ------
    BracketInvalid
        If ``F_lo`` is already sliding or ``F_hi`` is not.
    """
    rho = as_fraction(rho)
    if q is None:
        q = rho.denominator
    p = rho * q
    if p.denominator != 1:
        raise ModelError(f"q={q} is incompatible with rho={rho}")
    s = s or IntegratorSettings()
    fmax = max_onsite_force(spec_template)
    if fmax == 0.0 and spec_template.forcing.F_AC == 0.0:
        # no on-site force: every F > 0 translates the chain rigidly
        return float(F_lo)
    if F_hi is None:
        F_hi = 1.05 * fmax + 1e-3
    if not (tol > 0 and F_lo < F_hi):
        raise BracketInvalid(f"need F_lo < F_hi and tol > 0, got [{F_lo}, {F_hi}], tol={tol}")
    c_init = PeriodicConfiguration.uniform(int(p), q)

    def sliding(F, c):
        est = _velocity_or_partial(c, spec_template.with_forcing(F_DC=F), s)
        log.debug("F_DC=%.8f v=%.3e +- %.1e", F, est.v, est.confidence_halfwidth)
        return is_sliding(est, v_threshold), est.final_state

    lo_sl, c_lo = sliding(F_lo, c_init)
    if lo_sl:
        raise BracketInvalid(f"already sliding at F_lo={F_lo}")
    hi_sl, c_hi = sliding(F_hi, c_init)
    if not hi_sl:
        raise BracketInvalid(f"not sliding at F_hi={F_hi}")
    c = c_lo
    while F_hi - F_lo > tol:
        mid = 0.5 * (F_lo + F_hi)
        sl, c = sliding(mid, c)
        if sl:
            F_hi = mid
        else:
            F_lo = mid
    return 0.5 * (F_lo + F_hi)


def synchronization_check(traj: TrajectorySample, shifts: Iterable[tuple[int, int, int]],
                          tol: float = ZERO_RTOL, stride: int = 1) -> SyncResult:
    """Test that ``u(t)`` and ``S_{m,n} u(t + s)`` never intersect.

    ``s`` counts stroboscopic samples. Every ``stride``-th admissible sample time
    is checked. Identical configurations count as non-intersecting.

    Raises
    ------
    InsufficientSpan
        If some ``|s|`` is not smaller than the number of samples.
    """
    shifts = [tuple(int(a) for a in sh) for sh in shifts]
    N = len(traj)
    for m, n, sh in shifts:
        if abs(sh) >= N:
            raise InsufficientSpan(f"offset s={sh} needs more than {N} samples")
    checked = 0
    for m, n, sh in shifts:
        lo, hi = max(0, -sh), min(N, N - sh)
        for i in range(lo, hi, stride):
            u = traj.state(i)
            v = translate(traj.state(i + sh), m, n)
            checked += 1
            try:
                rep = count_intersections(u, v, rtol=tol)
            except IdenticalConfigurations:
                continue
            if rep.count:
                return SyncResult(False, (m, n, sh, i, rep.sites[0]), checked)
    return SyncResult(True, None, checked)
