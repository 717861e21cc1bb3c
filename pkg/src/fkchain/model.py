"""Generalized Frenkel-Kontorova chain: potentials, periodic lifts, translations.

A configuration of the infinite chain is stored as a (p, q)-periodic lift: q base
positions ``u_0 .. u_{q-1}`` together with the winding ``p``, so that
``u_{j+q} = u_j + p`` for every integer ``j``. Positions are never reduced mod 1
here; reduction happens at projection/output time only.

The energy is ``H = sum_j W(u_{j+1} - u_j) - V(u_j)`` and the overdamped dynamics
reads ``du_j/dt = W'(u_{j+1}-u_j) - W'(u_j-u_{j-1}) + V'(u_j) + f(t)``.
"""
from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

__all__ = [
    "ModelError",
    "TrigSeries",
    "Forcing",
    "ModelSpec",
    "PeriodicConfiguration",
    "energy_window",
    "rhs_force",
    "forces",
    "translate",
    "mean_spacing",
    "width_deviation",
    "standard_model",
]


class ModelError(ValueError):
    """Invalid model or configuration parameters."""


@dataclass(frozen=True)
class TrigSeries:
    """Finite 1-periodic series ``sum_m cos[m] cos(2 pi m x) + sin[m] sin(2 pi m x)``.

    Harmonic ``m`` runs from 1 to ``len(cos)``; only integer frequencies exist by
    construction.
    """

    cos: tuple[float, ...] = ()
    sin: tuple[float, ...] = ()

    def __post_init__(self):
        c = tuple(float(a) for a in self.cos)
        s = tuple(float(b) for b in self.sin)
        n = max(len(c), len(s))
        c += (0.0,) * (n - len(c))
        s += (0.0,) * (n - len(s))
        if not all(map(math.isfinite, c + s)):
            raise ModelError("trigonometric coefficients must be finite")
        object.__setattr__(self, "cos", c)
        object.__setattr__(self, "sin", s)

    def __len__(self):
        return len(self.cos)

    @functools.cached_property
    def _arrays(self):
        c = np.asarray(self.cos)
        s = np.asarray(self.sin)
        w = TWO_PI * np.arange(1, len(self) + 1)
        return c, s, w

    def _eval(self, x, order):
        x = np.asarray(x, dtype=float)
        if not len(self):
            return np.zeros_like(x)
        c, s, w = self._arrays
        if len(self) == 1:
            # single harmonic: avoid the broadcast over m
            arg = w[0] * x
            ca, sa = np.cos(arg), np.sin(arg)
            if order == 0:
                return c[0] * ca + s[0] * sa
            if order == 1:
                return w[0] * (s[0] * ca - c[0] * sa)
            return -w[0] ** 2 * (c[0] * ca + s[0] * sa)
        shape = (-1,) + (1,) * x.ndim
        wm = w.reshape(shape)
        arg = wm * x
        ca, sa = np.cos(arg), np.sin(arg)
        cm, sm = c.reshape(shape), s.reshape(shape)
        if order == 0:
            return np.sum(cm * ca + sm * sa, axis=0)
        if order == 1:
            return np.sum(wm * (sm * ca - cm * sa), axis=0)
        return -np.sum(wm**2 * (cm * ca + sm * sa), axis=0)

    def value(self, x):
        return self._eval(x, 0)

    def d1(self, x):
        return self._eval(x, 1)

    def d2(self, x):
        return self._eval(x, 2)


# V(u) = -cos(2 pi u) / (2 pi)^2, scaled by k
STANDARD_V = TrigSeries(cos=(-1.0 / TWO_PI**2,))


@dataclass(frozen=True)
class Forcing:
    """Driving force ``f(t) = F_DC + F_AC sin(2 pi nu0 t)``; DC when ``F_AC == 0``."""

    F_DC: float = 0.0
    F_AC: float = 0.0
    nu0: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.F_DC):
            raise ModelError("F_DC must be finite")
        if not (self.F_AC >= 0.0 and math.isfinite(self.F_AC)):
            raise ModelError("F_AC must be a finite number >= 0")
        if not (self.nu0 > 0.0 and math.isfinite(self.nu0)):
            raise ModelError("nu0 must be > 0")

    @property
    def is_dc(self) -> bool:
        return self.F_AC == 0.0

    def __call__(self, t):
        if self.is_dc:
            return self.F_DC + 0.0 * np.asarray(t, dtype=float)
        return self.F_DC + self.F_AC * np.sin(TWO_PI * self.nu0 * np.asarray(t, dtype=float))

    @property
    def period(self) -> Fraction | None:
        """Exact forcing period ``1/nu0`` (None for DC).

        Stroboscopic analysis needs a rational frequency with a small denominator.
        """
        if self.is_dc:
            return None
        nu = Fraction(self.nu0).limit_denominator(1000)
        if abs(float(nu) - self.nu0) > 1e-12 * max(1.0, self.nu0):
            raise ModelError(f"nu0={self.nu0!r} is not rational with a small denominator")
        return 1 / nu


def _convex_check(w_d2, lo, hi, delta):
    grid = np.linspace(lo, hi, 1000)
    worst = float(np.min(w_d2(grid)))
    if not worst >= delta:
        raise ModelError(
            f"W'' must be >= delta={delta:g} on [{lo:g}, {hi:g}]; minimum found {worst:g}"
        )


@dataclass(frozen=True)
class ModelSpec:
    """FK model: coupling ``W``, on-site potential ``V = k * v_shape`` and forcing.

    ``W(p) = sum_i w_poly[i] (p - mu)^i + w_trig(p)``. The defaults give the
    standard model ``W(p) = (p - mu)^2 / 2`` and ``V(u) = -k cos(2 pi u) / (2 pi)^2``.
    Strict convexity ``W'' >= delta`` is verified on a grid over ``spacing_span``.
    """

    k: float = 1.0
    mu: float = 0.0
    forcing: Forcing = field(default_factory=Forcing)
    w_poly: tuple[float, ...] = (0.0, 0.0, 0.5)
    w_trig: TrigSeries = field(default_factory=TrigSeries)
    v_shape: TrigSeries = STANDARD_V
    delta: float = 1e-3
    spacing_span: tuple[float, float] = (-3.0, 4.0)

    def __post_init__(self):
        if not (self.k >= 0.0 and math.isfinite(self.k)):
            raise ModelError("k must be a finite number >= 0")
        if not math.isfinite(self.mu):
            raise ModelError("mu must be finite")
        if not self.delta > 0.0:
            raise ModelError("delta must be > 0")
        object.__setattr__(self, "w_poly", tuple(float(c) for c in self.w_poly))
        lo, hi = self.spacing_span
        _convex_check(self.d2W, self.mu + lo, self.mu + hi, self.delta)

    # -- potentials ---------------------------------------------------------
    @property
    def family(self) -> str:
        standard = (
            self.w_poly == (0.0, 0.0, 0.5)
            and not len(self.w_trig)
            and self.v_shape == STANDARD_V
        )
        return "standard" if standard else "custom"

    @functools.cached_property
    def _wcoef(self):
        P = np.polynomial.polynomial
        c0 = np.asarray(self.w_poly)
        c1 = P.polyder(c0) if c0.size > 1 else np.zeros(1)
        c2 = P.polyder(c0, 2) if c0.size > 2 else np.zeros(1)
        return c0, c1, c2

    def _wpoly(self, x, order):
        x = np.asarray(x, dtype=float)
        out = np.polynomial.polynomial.polyval(x - self.mu, self._wcoef[order])
        if len(self.w_trig):
            out = out + self.w_trig._eval(x, order)
        return out

    def W(self, x):
        return self._wpoly(x, 0)

    def dW(self, x):
        return self._wpoly(x, 1)

    def d2W(self, x):
        return self._wpoly(x, 2)

    def V(self, u):
        return self.k * self.v_shape.value(u)

    def dV(self, u):
        return self.k * self.v_shape.d1(u)

    def d2V(self, u):
        return self.k * self.v_shape.d2(u)

    def f(self, t):
        return self.forcing(t)

    # -- variants -----------------------------------------------------------
    def with_forcing(self, F_DC=None, F_AC=None, nu0=None) -> "ModelSpec":
        fo = self.forcing
        new = Forcing(
            fo.F_DC if F_DC is None else float(F_DC),
            fo.F_AC if F_AC is None else float(F_AC),
            fo.nu0 if nu0 is None else float(nu0),
        )
        return dataclasses.replace(self, forcing=new)

    def replace(self, **changes) -> "ModelSpec":
        return dataclasses.replace(self, **changes)

    def kernel_params(self) -> tuple:
        """Flat parameter tuple consumed by the integration kernels."""
        return (
            float(self.mu),
            np.ascontiguousarray(self._wcoef[1], dtype=float),
            np.ascontiguousarray(self.w_trig.cos, dtype=float),
            np.ascontiguousarray(self.w_trig.sin, dtype=float),
            float(self.k),
            np.ascontiguousarray(self.v_shape.cos, dtype=float),
            np.ascontiguousarray(self.v_shape.sin, dtype=float),
            float(self.forcing.F_DC),
            float(self.forcing.F_AC),
            float(self.forcing.nu0),
        )


def standard_model(k=1.0, F_DC=0.0, F_AC=0.0, nu0=1.0, mu=0.0) -> ModelSpec:
    return ModelSpec(k=k, mu=mu, forcing=Forcing(F_DC, F_AC, nu0))


class PeriodicConfiguration:
    """Lift of a (p, q)-periodic chain state.

    Parameters
    ----------
    base : sequence of float
        Positions ``u_0 .. u_{q-1}``.
    p : int
        Winding; ``u_{j+q} = u_j + p``.

    Instances are immutable; ``base`` is a read-only array.
    """

    __slots__ = ("_base", "_p")

    def __init__(self, base: Iterable[float], p: int = 0):
        arr = np.array(base, dtype=float).reshape(-1)
        if arr.size < 1:
            raise ModelError("a periodic configuration needs q >= 1 sites")
        if not np.all(np.isfinite(arr)):
            raise ModelError("positions must be finite")
        if int(p) != p:
            raise ModelError("winding p must be an integer")
        arr.setflags(write=False)
        self._base = arr
        self._p = int(p)

    @classmethod
    def uniform(cls, p: int, q: int, offset: float = 0.0) -> "PeriodicConfiguration":
        """``u_j = offset + j p / q``."""
        return cls(offset + np.arange(q) * (p / q), p)

    @property
    def base(self) -> np.ndarray:
        return self._base

    @property
    def p(self) -> int:
        return self._p

    @property
    def q(self) -> int:
        return self._base.size

    @property
    def rho(self) -> Fraction:
        return Fraction(self._p, self.q)

    def __getitem__(self, j: int) -> float:
        d, r = divmod(int(j), self.q)
        return float(self._base[r] + d * self._p)

    def positions(self, start: int, stop: int) -> np.ndarray:
        """Lift values ``u_start .. u_{stop-1}``."""
        idx = np.arange(start, stop)
        d, r = np.divmod(idx, self.q)
        return self._base[r] + d * self._p

    def spacings(self) -> np.ndarray:
        """``u_{j+1} - u_j`` for ``j = 0 .. q-1``."""
        b = self._base
        return np.append(np.diff(b), b[0] + self._p - b[-1])

    def shifted(self, x: float) -> "PeriodicConfiguration":
        return PeriodicConfiguration(self._base + x, self._p)

    def with_base(self, base) -> "PeriodicConfiguration":
        return PeriodicConfiguration(base, self._p)

    def repeat(self, times: int) -> "PeriodicConfiguration":
        """The same infinite configuration described over ``times`` periods."""
        return PeriodicConfiguration(self.positions(0, self.q * times), self._p * times)

    def __eq__(self, other):
        if not isinstance(other, PeriodicConfiguration):
            return NotImplemented
        return self._p == other._p and np.array_equal(self._base, other._base)

    __hash__ = None

    def __repr__(self):
        with np.printoptions(precision=6, threshold=8):
            return f"PeriodicConfiguration(p={self._p}, q={self.q}, base={self._base})"


def energy_window(c: PeriodicConfiguration, m: int, n: int, spec: ModelSpec) -> float:
    """``sum_{j=m}^{n-1} W(u_{j+1} - u_j) - V(u_j)``."""
    if not m < n:
        raise ModelError("energy window needs m < n")
    u = c.positions(m, n + 1)
    return float(np.sum(spec.W(np.diff(u)) - spec.V(u[:-1])))


def forces(c: PeriodicConfiguration, t: float, spec: ModelSpec) -> np.ndarray:
    """Right-hand side of the equations of motion at every base site."""
    d = c.spacings()
    dw = spec.dW(d)
    return dw - np.roll(dw, 1) + spec.dV(c.base) + spec.f(t)


def rhs_force(c: PeriodicConfiguration, j: int, t: float, spec: ModelSpec) -> float:
    """``W'(u_{j+1}-u_j) - W'(u_j-u_{j-1}) + V'(u_j) + f(t)`` at any integer site."""
    u = c.positions(j - 1, j + 2)
    return float(spec.dW(u[2] - u[1]) - spec.dW(u[1] - u[0]) + spec.dV(u[1]) + spec.f(t))


def translate(c: PeriodicConfiguration, m: int, n: int) -> PeriodicConfiguration:
    """``S_{m,n}``: ``(S c)_j = u_{j-m} + n``."""
    return PeriodicConfiguration(c.positions(-m, c.q - m) + n, c.p)


def mean_spacing(c: PeriodicConfiguration) -> Fraction:
    return c.rho


def width_deviation(c: PeriodicConfiguration) -> float:
    """Smallest ``K`` with ``|u_n - u_m - (n - m) rho| <= K`` for all ``m, n``.

    ``u_j - j rho`` is q-periodic, so the bound is its oscillation over one period.
    """
    phi = c.base - np.arange(c.q) * (c.p / c.q)
    return float(phi.max() - phi.min())


def as_fraction(rho) -> Fraction:
    if isinstance(rho, Fraction):
        return rho
    if isinstance(rho, str):
        return Fraction(rho.strip())
    if isinstance(rho, Sequence) and len(rho) == 2:
        return Fraction(int(rho[0]), int(rho[1]))
    return Fraction(rho)
