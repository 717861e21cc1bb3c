"""Configurations with discommensurations and their relaxation to synchronized states."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dynamics import IntegratorSettings, evolve, integrate, synchronization_check
from .errors import IdenticalConfigurations, InsertionsTooDense
from .intersect import count_intersections, defect_scan
from .model import (ModelError, ModelSpec, PeriodicConfiguration, as_fraction, standard_model,
                    translate, width_deviation)

__all__ = [
    "DefectedInitializer",
    "DefectRelaxation",
    "make_defected",
    "defected_initializer",
    "defect_relaxation_test",
    "parse_insertions",
]


@dataclass(frozen=True)
class DefectedInitializer:
    background: Fraction
    insertions: tuple[tuple[int, int], ...]
    configuration: PeriodicConfiguration
    defect_count: int
    n_window: dict


def parse_insertions(text: str) -> list[tuple[int, int]]:
    """``"site:winding,site:winding"``, e.g. ``"8:-1,24:-1"``; an empty string means none."""
    out = []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        try:
            site, w = tok.split(":")
            out.append((int(site), int(w)))
        except ValueError:
            raise ModelError(f"bad insertion {tok!r}; expected site:winding") from None
    return out


def _check_spacing(sites, q_total):
    s = sorted(sites)
    if len(s) < 2:
        return
    for a, b in zip(s, s[1:] + [s[0] + q_total]):
        if b - a < 2:
            raise InsertionsTooDense(f"insertions at sites {a} and {b % q_total} are closer than 2")


def make_defected(rho, insertions: Sequence[tuple[int, int]], q_total: int,
                  spec: ModelSpec | None = None, relax_time: float = 5.0,
                  s: IntegratorSettings | None = None) -> PeriodicConfiguration:
    """Uniform background of mean spacing ``rho`` with localized extra winding.

    Each insertion ``(site, w)`` adds ``w`` to every position beyond ``site``,
    spread over the two bonds around it; ``w = -1`` squeezes in an extra
    particle, ``w = +1`` removes one. The result is relaxed by a short undriven
    gradient flow (``relax_time``, default model ``k = 1``).

    Raises
    ------
    InsertionsTooDense
        If two insertions are less than two sites apart (cyclically).
    ModelError
        If the total winding ``q_total * rho + sum(w)`` is not an integer or a
        site is outside ``1 .. q_total - 2``.
    """
    rho = as_fraction(rho)
    insertions = [(int(a), int(w)) for a, w in insertions]
    p_total = rho * q_total + sum(w for _, w in insertions)
    if p_total.denominator != 1:
        raise ModelError(f"q_total * rho + windings = {p_total} is not an integer")
    for a, w in insertions:
        if not 1 <= a <= q_total - 2:
            raise ModelError(f"insertion site {a} outside 1..{q_total - 2}")
        if w == 0:
            raise ModelError("insertion winding must be nonzero")
    _check_spacing([a for a, _ in insertions], q_total)
    j = np.arange(q_total)
    u = j * float(rho)
    for a, w in insertions:
        u = u + w * np.clip((j - a + 1) / 2.0, 0.0, 1.0)
    c = PeriodicConfiguration(u, int(p_total))
    if relax_time > 0:
        spec = (spec or standard_model()).with_forcing(F_DC=0.0, F_AC=0.0)
        c = evolve(c, spec, relax_time, s)
    return c


def defected_initializer(rho, insertions, q_total, **kw) -> DefectedInitializer:
    c = make_defected(rho, insertions, q_total, **kw)
    count, _, window = defect_scan(c)
    return DefectedInitializer(as_fraction(rho), tuple(map(tuple, insertions)), c, count, window)


@dataclass(frozen=True)
class DefectRelaxation:
    """Outcome of a relaxation run.

    ``trend`` lists ``(time, max crossing count over translates)`` per sampled
    time; ``non_increasing`` reports whether every individual pair
    ``(u(t), S_{m,n} u(t))`` had a non-increasing count.
    """

    status: str
    witnesses: tuple
    trend: tuple
    non_increasing: bool
    t_sync: float | None = None


def _pair_counts(c, pairs):
    out = np.zeros(len(pairs), dtype=int)
    for k, (m, n) in enumerate(pairs):
        try:
            out[k] = count_intersections(c, translate(c, m, n)).count
        except IdenticalConfigurations:
            out[k] = 0
    return out


def defect_relaxation_test(c0: PeriodicConfiguration, spec: ModelSpec,
                           s: IntegratorSettings | None = None, t_max: float = 2000.0,
                           check_every: float = 50.0, tail: int = 20, s_offsets: int = 3) -> DefectRelaxation:
    """Evolve a defected configuration and test synchronization of the tail.

    Every ``check_every`` time units the crossing counts of ``u(t)`` with all
    translates in the defect window are recorded; once they all vanish, a
    synchronization check over ``tail`` further samples with time offsets up to
    ``s_offsets`` confirms the status. The run stops at ``t_max``.
    """
    if not spec.forcing.is_dc:
        raise ModelError("defect relaxation applies to DC forcing")
    s = (s or IntegratorSettings()).resolved(spec)
    q = c0.q
    # fixed window, one unit wider than the initial width bound
    K0 = width_deviation(c0) + 1.0
    pairs = []
    for m in range(q):
        c = m * c0.p / q
        for n in range(math.floor(c - K0) - 1, math.ceil(c + K0) + 2):
            if (m, n) != (0, 0):
                pairs.append((m, n))
    c, t = c0, 0.0
    prev = _pair_counts(c, pairs)
    trend = [(0.0, int(prev.max(initial=0)))]
    monotone = True
    witnesses: tuple = ()
    while t < t_max - 1e-9:
        dt = min(check_every, t_max - t)
        c = evolve(c, spec, dt, s, t0=t)
        t += dt
        cur = _pair_counts(c, pairs)
        monotone &= bool(np.all(cur <= prev))
        prev = cur
        trend.append((t, int(cur.max(initial=0))))
        if cur.max(initial=0) == 0:
            traj = integrate(c, spec, s, t_span=s.strobe_period * (tail - 1), t0=t)
            shifts = [(m, n, sh) for (m, n) in pairs for sh in range(s_offsets)]
            res = synchronization_check(traj, shifts)
            if res.synchronized:
                return DefectRelaxation("synchronized", (), tuple(trend), monotone, t)
            witnesses = (res.witness,)
    bad = tuple((m, n, int(k)) for (m, n), k in zip(pairs, prev) if k) or witnesses
    return DefectRelaxation("unresolved", bad, tuple(trend), monotone, None)
