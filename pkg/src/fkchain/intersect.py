"""Intersections of configuration graphs, defect counts, the intersection functional.

Two configurations ``u, v`` intersect at bond ``j`` when ``d_j d_{j+1} <= 0`` with
``d = v - u``. A run of zeros in ``d`` is one event, placed at the bond entering
the run; it is transversal when the sign of ``d`` differs on the two sides of
the event and non-transversal (a touching) otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import IdenticalConfigurations
from .model import PeriodicConfiguration, translate, width_deviation

__all__ = [
    "ZERO_RTOL",
    "IntersectionReport",
    "crossing_events",
    "count_intersections",
    "defect_count",
    "defect_scan",
    "EmpiricalEnsemble",
    "lyapunov_estimate",
    "monotonicity_series",
]

ZERO_RTOL = 1e-9
TRANSVERSAL = "transversal"
NONTRANSVERSAL = "nontransversal"


@dataclass(frozen=True)
class IntersectionReport:
    """Crossing events of a pair over one fundamental period."""

    count: int
    sites: tuple[int, ...]
    kinds: tuple[str, ...]
    period: int

    @property
    def transversal(self) -> int:
        return sum(k == TRANSVERSAL for k in self.kinds)


def _signs(d, scale, rtol):
    s = np.sign(d).astype(np.int8)
    s[np.abs(d) <= rtol * scale] = 0
    return s


def crossing_events(d, scale=None, cyclic: bool = True, rtol: float = ZERO_RTOL):
    """Crossing events of a difference sequence.

    Parameters
    ----------
    d : array_like
        Differences ``v_j - u_j``. With ``cyclic=True`` the sequence is one period
        and bond ``L-1`` joins ``d[L-1]`` to ``d[0]``.
    scale : array_like, optional
        Zero threshold scale, ``|d_j| <= rtol * scale_j`` counts as zero
        (default 1).

    Returns
    -------
    list of (bond, kind)

    Raises
    ------
    IdenticalConfigurations
        If every entry is zero.
    """
    d = np.asarray(d, dtype=float)
    L = d.size
    s = _signs(d, 1.0 if scale is None else np.asarray(scale, dtype=float), rtol)
    nz = np.flatnonzero(s)
    if nz.size == 0:
        raise IdenticalConfigurations("difference vanishes identically")
    events = []
    if cyclic:
        # walk from one nonzero entry to the next, wrapping around once
        idx = np.append(nz, nz[0] + L)
        for a, b in zip(idx[:-1], idx[1:]):
            sa, sb = s[a % L], s[b % L]
            if b == a + 1:
                if sa != sb:
                    events.append((int(a % L), TRANSVERSAL))
            else:
                events.append((int(a % L), TRANSVERSAL if sa != sb else NONTRANSVERSAL))
        events.sort()
        return events
    first, last = nz[0], nz[-1]
    if first > 0:
        # leading zero run touching the window edge
        events.append((int(first - 1), NONTRANSVERSAL))
    for a, b in zip(nz[:-1], nz[1:]):
        if b == a + 1:
            if s[a] != s[b]:
                events.append((int(a), TRANSVERSAL))
        else:
            events.append((int(a), TRANSVERSAL if s[a] != s[b] else NONTRANSVERSAL))
    if last < L - 1:
        events.append((int(last), NONTRANSVERSAL))
    return events


def _report(events, period):
    return IntersectionReport(len(events), tuple(e[0] for e in events),
                              tuple(e[1] for e in events), period)


def count_intersections(u: PeriodicConfiguration, v: PeriodicConfiguration,
                        n_span: int = 0, rtol: float = ZERO_RTOL) -> IntersectionReport:
    """Intersections of ``u`` and ``v`` over one common period.

    For equal mean spacing the difference is periodic with period
    ``L = lcm(q_u, q_v)`` and events are counted cyclically. For different mean
    spacings the window ``0..L`` of ``v - (u + n)`` is scanned for every
    ``|n| <= n_span`` and the events are pooled.

    Raises
    ------
    IdenticalConfigurations
        If ``u`` and ``v`` coincide (equal mean spacing only).
    """
    L = math.lcm(u.q, v.q)
    if u.rho == v.rho:
        a, b = u.positions(0, L), v.positions(0, L)
        ev = crossing_events(b - a, 1.0 + np.abs(a) + np.abs(b), cyclic=True, rtol=rtol)
        return _report(ev, L)
    a, b = u.positions(0, L + 1), v.positions(0, L + 1)
    events = []
    for n in range(-n_span, n_span + 1):
        an = a + n
        try:
            ev = crossing_events(b - an, 1.0 + np.abs(an) + np.abs(b), cyclic=False, rtol=rtol)
        except IdenticalConfigurations:
            continue
        events += [(j, kind) for j, kind in ev if j < L]
    events.sort()
    return _report(events, L)


def _shift_window(u: PeriodicConfiguration, m: int):
    """Integers ``n`` for which ``S_{m,n} u`` can cross ``u``.

    ``(S_{m,n}u)_j - u_j = n - m rho + (phi_{j-m} - phi_j)`` with ``phi`` of
    oscillation ``K``, so a sign change needs ``|n - m rho| <= K``.
    """
    K = width_deviation(u)
    c = m * u.p / u.q
    return range(math.floor(c - K) - 1, math.ceil(c + K) + 2)


def defect_scan(u: PeriodicConfiguration):
    """Maximal self-intersection count over translates, with a witness.

    Returns ``(count, (m, n), n_window)``; ``n_window`` maps each ``m`` to the
    scanned range of ``n``.
    """
    best, witness, windows = 0, None, {}
    for m in range(u.q):
        rng = _shift_window(u, m)
        windows[m] = (rng.start, rng.stop - 1)
        for n in rng:
            if m == 0 and n == 0:
                continue
            try:
                c = count_intersections(u, translate(u, m, n)).count
            except IdenticalConfigurations:
                continue
            if c > best:
                best, witness = c, (m, n)
    return best, witness, windows


def defect_count(u: PeriodicConfiguration) -> int:
    """Maximal number of intersections of ``u`` with its translates ``S_{m,n} u``.

    ``m`` runs over one period; ``n`` over the window around ``m rho`` outside
    which translates are strictly ordered with ``u`` by the width bound.
    """
    return defect_scan(u)[0]


@dataclass(frozen=True)
class EmpiricalEnsemble:
    """Uniformly weighted configurations, closed under spatial translates.

    ``generators`` are the configurations as given; ``members`` adds every
    translate ``S_{m,0}`` over one period, so the ensemble is invariant under
    the spatial shift (integer ``n`` shifts are summed over in the functional).
    """

    generators: tuple[PeriodicConfiguration, ...]
    members: tuple[PeriodicConfiguration, ...]

    @classmethod
    def closed(cls, configs: Iterable[PeriodicConfiguration]) -> "EmpiricalEnsemble":
        gens = tuple(configs)
        if not gens:
            raise ValueError("ensemble needs at least one configuration")
        members = tuple(translate(c, m, 0) for c in gens for m in range(c.q))
        return cls(gens, members)

    @classmethod
    def space_time(cls, u: PeriodicConfiguration, spec, N: int, s=None) -> "EmpiricalEnsemble":
        """Dirac sample ``{T_n S_m u : 0 <= n <= N, -N <= m <= N}`` with unit time steps."""
        from .dynamics import integrate

        traj = integrate(u, spec, s, t_span=float(N)) if N > 0 else None
        states = [u] if traj is None else traj.states[: N + 1]
        gens = [translate(c, m, 0) for c in states for m in range(-N, N + 1)]
        return cls(tuple(gens), tuple(gens))

    def __len__(self):
        return len(self.members)

    def bond_pair(self):
        """Positions ``(u_0, u_1)`` of every member."""
        a = np.array([[c.base[0], c[1]] for c in self.members])
        return a[:, 0], a[:, 1]


def _pair_counts(A0, A1, B0, B1, rtol=ZERO_RTOL):
    """Number of integers ``n`` with ``u + n`` and ``v`` crossing at bond 0, per pair.

    With ``D_i = v_i - u_i`` the event at bond 0 needs ``D_0 - n != 0`` and
    ``(D_0 - n)(D_1 - n) <= 0``; the admissible ``n`` form the integer points of
    ``(D_0, D_1]`` or ``[D_1, D_0)``.
    """
    D0 = B0[None, :] - A0[:, None]
    D1 = B1[None, :] - A1[:, None]
    t0 = rtol * (1.0 + np.abs(A0)[:, None] + np.abs(B0)[None, :])
    t1 = rtol * (1.0 + np.abs(A1)[:, None] + np.abs(B1)[None, :])
    up = np.floor(D1 + t1) - np.floor(D0 + t0)
    down = np.ceil(D0 - t0) - np.ceil(D1 - t1)
    return np.where(D0 < D1, np.maximum(up, 0), np.maximum(down, 0))


def lyapunov_estimate(e: EmpiricalEnsemble) -> float:
    """Average number of crossings at bond 0 between two members, summed over ``n``.

    ``(1/|e|^2) sum_{u,v} sum_n I(u + n, v)``. The sum over ``n`` is exact: only
    ``d_0`` and ``d_1`` enter the bond-0 indicator, so no width cutoff is needed.
    """
    if len(e) == 0:
        raise ValueError("empty ensemble")
    a0, a1 = e.bond_pair()
    return float(_pair_counts(a0, a1, a0, a1).sum()) / len(e) ** 2


def monotonicity_series(e0: EmpiricalEnsemble, spec, times: Sequence[float], s=None) -> np.ndarray:
    """Intersection functional along the flow at the given times.

    Generators are evolved and the ensemble is re-closed at each time; the flow
    commutes with translates, so this equals evolving every member.
    """
    from .dynamics import evolve

    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("times must be non-negative and increasing")
    gens = list(e0.generators)
    t = 0.0
    out = np.empty(times.size)
    for i, ti in enumerate(times):
        if ti > t:
            gens = [evolve(c, spec, ti - t, s, t0=t) for c in gens]
            t = ti
        out[i] = lyapunov_estimate(EmpiricalEnsemble.closed(gens))
    return out
