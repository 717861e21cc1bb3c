"""Cylinder representation of sampled attractors.

A configuration ``u`` projects to ``pi(u) = (u_0 mod 1, u_1 - u_0)`` on the
cylinder; the spatial shift acts there as the map ``h``, so the points
``project(u, j)`` for consecutive ``j`` form one ``h``-orbit. Portraits collect
these orbits over post-burn-in stroboscopic samples of one or more runs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .dynamics import IntegratorSettings, evolve, integrate
from .errors import IdenticalConfigurations, TooFewPoints
from .intersect import crossing_events, count_intersections
from .model import ModelSpec, PeriodicConfiguration, forces, translate, width_deviation

__all__ = [
    "PortraitPoint",
    "Portrait",
    "CircleReport",
    "CheckResult",
    "AttractorClassification",
    "project",
    "build_portrait",
    "rotation_number",
    "kam_circle_detect",
    "depinned_classify",
    "injectivity_check",
    "at_most_one_crossing_check",
    "classify_dc_attractor",
    "pair_crossings",
]


def project(c: PeriodicConfiguration, j: int = 0) -> tuple[float, float]:
    """``(u_j mod 1, u_{j+1} - u_j)``."""
    a, b = c.positions(j, j + 2)
    return float(a % 1.0), float(b - a)


@dataclass(frozen=True)
class PortraitPoint:
    x: float
    pspace: float
    orbit_id: int
    time_index: int
    init_id: int = 0


@dataclass(frozen=True)
class Portrait:
    """Point cloud on the cylinder plus a subsample of full configurations.

    Columns ``x, pspace, orbit, time_index, init`` are parallel arrays; one
    orbit is one (initial condition, sample time) pair. ``retained`` holds
    ``(init_id, time_index, configuration)`` for every ``retain_every``-th sample.
    """

    x: np.ndarray
    pspace: np.ndarray
    orbit: np.ndarray
    time_index: np.ndarray
    init: np.ndarray
    model: ModelSpec
    burn_in: float
    samples: int
    strobe_period: float = 1.0
    retained: tuple = ()
    rhos: tuple[Fraction, ...] = ()

    def __len__(self):
        return self.x.size

    @property
    def points(self) -> list[PortraitPoint]:
        return [PortraitPoint(float(a), float(b), int(o), int(t), int(i))
                for a, b, o, t, i in zip(self.x, self.pspace, self.orbit, self.time_index, self.init)]

    def mask(self, inits=None, orbits=None) -> np.ndarray:
        m = np.ones(self.x.size, dtype=bool)
        if inits is not None:
            m &= np.isin(self.init, list(inits))
        if orbits is not None:
            m &= np.isin(self.orbit, list(orbits))
        return m

    def inits_with_rho(self, rho) -> list[int]:
        return [i for i, r in enumerate(self.rhos) if r == Fraction(rho)]

    def configurations(self, inits=None) -> list[PeriodicConfiguration]:
        return [c for i, _, c in self.retained if inits is None or i in inits]

    def with_retained(self, extra: Iterable[tuple[int, int, PeriodicConfiguration]]) -> "Portrait":
        return _replace(self, retained=self.retained + tuple(extra))

    def to_json(self) -> str:
        doc = {
            "burn_in": self.burn_in,
            "samples": self.samples,
            "strobe_period": self.strobe_period,
            "points": [{"x": float(a), "p": float(b), "orbit": int(o), "t": int(t), "init": int(i)}
                       for a, b, o, t, i in zip(self.x, self.pspace, self.orbit, self.time_index, self.init)],
            "retained_configs": [{"init": i, "t": t, "p": c.p, "base": c.base.tolist()}
                                 for i, t, c in self.retained],
        }
        return json.dumps(doc, sort_keys=True)

    def csv_rows(self):
        yield ("x", "p", "orbit", "t")
        for a, b, o, t in zip(self.x, self.pspace, self.orbit, self.time_index):
            yield (repr(float(a)), repr(float(b)), int(o), int(t))


def _replace(portrait, **changes):
    import dataclasses

    return dataclasses.replace(portrait, **changes)


def build_portrait(inits: Sequence[PeriodicConfiguration], spec: ModelSpec,
                   s: IntegratorSettings | None = None, samples: int = 200,
                   retain_every: int = 10) -> Portrait:
    """Post-burn-in stroboscopic samples of every run, projected onto the cylinder.

    Each sample contributes the ``q`` points ``project(c, j)``, ``j = 0..q-1``,
    under one orbit id. Burn-in is ``s.t_burn`` rounded up to a whole number of
    strobe periods.
    """
    s = (s or IntegratorSettings()).resolved(spec)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    strobe = s.strobe_period
    t_b = strobe * math.ceil(s.t_burn / strobe - 1e-9)
    cols = ([], [], [], [], [])
    retained, rhos = [], []
    for i, c0 in enumerate(inits):
        rhos.append(c0.rho)
        c = evolve(c0, spec, t_b, s) if t_b > 0 else c0
        if samples > 1:
            traj = integrate(c, spec, s, t_span=strobe * (samples - 1), t0=t_b)
            pos = traj.positions[:samples]
        else:
            pos = c.base[None, :]
        q = c0.q
        nxt = np.concatenate([pos[:, 1:], pos[:, :1] + c0.p], axis=1)
        for t in range(pos.shape[0]):
            cols[0].append(pos[t] % 1.0)
            cols[1].append(nxt[t] - pos[t])
            cols[2].append(np.full(q, i * samples + t))
            cols[3].append(np.full(q, t))
            cols[4].append(np.full(q, i))
            if t % retain_every == 0:
                retained.append((i, t, PeriodicConfiguration(pos[t], c0.p)))
    x, p, o, ti, ii = (np.concatenate(a) if a else np.empty(0) for a in cols)
    return Portrait(x, p, o.astype(int), ti.astype(int), ii.astype(int), spec, float(t_b),
                    int(samples), strobe, tuple(retained), tuple(rhos))


def rotation_number(points) -> float:
    """Average first-coordinate advance of an ``h``-orbit segment.

    ``points`` is a sequence of :class:`PortraitPoint` or ``(x, pspace)`` pairs in
    site order. Each point's ``pspace`` is the lifted advance to its successor,
    so over a full period the result is ``p/q`` up to round-off.

    Raises
    ------
    TooFewPoints
        With fewer than two points.
    """
    pts = list(points)
    if len(pts) < 2:
        raise TooFewPoints("a rotation number needs at least two points")
    if isinstance(pts[0], PortraitPoint):
        inc = np.array([pt.pspace for pt in pts])
    else:
        inc = np.asarray(pts, dtype=float)[:, 1]
    return float(np.mean(inc))


@dataclass(frozen=True)
class CircleReport:
    is_circle: bool
    max_gap: float
    max_spread: float
    n_points: int

    def __bool__(self):
        return self.is_circle


def _xy(portrait, inits=None, orbits=None):
    if isinstance(portrait, Portrait):
        m = portrait.mask(inits, orbits)
        return portrait.x[m], portrait.pspace[m]
    x, p = portrait
    return np.asarray(x, dtype=float) % 1.0, np.asarray(p, dtype=float)


def _detrended_spread(x, p):
    """Spread of ``p`` about its least-squares line in ``x``.

    A single-valued smooth curve leaves only curvature-sized residuals however
    steep it is, while two branches over the same bin leave their separation.
    """
    if x.size < 3:
        return float(np.ptp(p)) if x.size > 1 and np.ptp(x) == 0 else 0.0
    A = np.column_stack([np.ones_like(x), x - x.mean()])
    coef, *_ = np.linalg.lstsq(A, p, rcond=None)
    return float(np.ptp(p - A @ coef))


def kam_circle_detect(portrait, inits=None, orbits=None, gap_tol: float = 0.02,
                      graph_tol: float = 0.01) -> CircleReport:
    """Whether the filtered points lie on a single-valued curve covering the circle.

    Coverage: the largest circular gap between sorted ``x`` values is below
    ``gap_tol``. Graph property: within each ``x`` bin of width ``gap_tol`` the
    spread of ``pspace`` about its local linear trend is below ``graph_tol``.

    Raises
    ------
    TooFewPoints
        With fewer than 100 points after filtering.
    """
    x, p = _xy(portrait, inits, orbits)
    if x.size < 100:
        raise TooFewPoints(f"{x.size} points; circle detection needs at least 100")
    order = np.argsort(x)
    xs, ps = x[order], p[order]
    gaps = np.diff(np.concatenate([xs, [xs[0] + 1.0]]))
    max_gap = float(gaps.max())
    bins = np.floor(xs / gap_tol).astype(int)
    edges = np.flatnonzero(np.diff(bins)) + 1
    spread = max(_detrended_spread(bx, bp) for bx, bp in zip(np.split(xs, edges), np.split(ps, edges)))
    return CircleReport(max_gap < gap_tol and spread < graph_tol, max_gap, spread, int(x.size))


def depinned_classify(portrait: Portrait, rho, bins: int = 100, inits=None) -> str:
    """``depinned`` if the sampled positions mod 1 hit every one of ``bins`` bins.

    Positions of all sites are used: the sampled invariant set contains every
    spatial translate of each sample, and ``S_{m,0}`` moves site ``m`` to site 0.
    """
    if inits is None:
        inits = portrait.inits_with_rho(rho)
    x, _ = _xy(portrait, inits)
    if x.size == 0:
        return "pinned"
    hist = np.bincount(np.minimum((x * bins).astype(int), bins - 1), minlength=bins)
    return "depinned" if np.all(hist > 0) else "pinned"


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    witness: tuple | None = None
    n_checked: int = 0

    def __bool__(self):
        return self.passed


def _normalized_translates(c: PeriodicConfiguration):
    for m in range(c.q):
        w = c.positions(-m, c.q - m)
        yield PeriodicConfiguration(w - math.floor(w[0]), c.p)


def _config_distance(a: PeriodicConfiguration, b: PeriodicConfiguration) -> float:
    """Sup distance mod 1 over one common period, after the best integer shift."""
    L = math.lcm(a.q, b.q)
    d = a.positions(0, L) - b.positions(0, L)
    d -= round(float(d[0]))
    return float(np.max(np.abs(d)))


def injectivity_check(portrait: Portrait, pi_tol: float = 1e-6, config_tol: float = 1e-3,
                      inits=None) -> CheckResult:
    """Configurations with (nearly) equal projections must (nearly) coincide.

    All spatial translates of the retained configurations are compared; a pair
    with both projection coordinates within ``pi_tol`` (``x`` circularly) but
    configuration distance at least ``config_tol`` is returned as the witness.
    """
    confs = []
    for k, (i, t, c) in enumerate(portrait.retained):
        if inits is not None and i not in inits:
            continue
        for m, w in enumerate(_normalized_translates(c)):
            confs.append(((i, t, m), w))
    if len(confs) < 2:
        return CheckResult(True, None, 0)
    xy = np.array([project(w) for _, w in confs])
    order = np.argsort(xy[:, 0])
    xs = xy[order, 0]
    n = len(order)
    checked = 0
    for a in range(n):
        # neighbours within pi_tol to the right, wrapping past x = 1
        b = a + 1
        while b < a + n:
            gap = xs[b % n] - xs[a] + (1.0 if b >= n else 0.0)
            if gap >= pi_tol:
                break
            ia, ib = order[a], order[b % n]
            if abs(xy[ia, 1] - xy[ib, 1]) < pi_tol:
                checked += 1
                wa, wb = confs[ia][1], confs[ib][1]
                if wa.rho != wb.rho or _config_distance(wa, wb) >= config_tol:
                    return CheckResult(False, (confs[ia][0], confs[ib][0]), checked)
            b += 1
    return CheckResult(True, None, checked)


def pair_crossings(u: PeriodicConfiguration, v: PeriodicConfiguration) -> int:
    """Intersections of ``u`` and ``v`` over the whole chain, per period when periodic.

    Equal mean spacings: the count over one common period (0 for identical
    configurations). Different mean spacings: ``v - u`` drifts linearly, so all
    crossings lie in a finite window of sites, which is scanned in full.
    """
    if u.rho == v.rho:
        try:
            return count_intersections(u, v).count
        except IdenticalConfigurations:
            return 0
    drift = float(v.rho - u.rho)
    K = width_deviation(u) + width_deviation(v) + 1.0
    offset = float(v.base[0] - u.base[0])
    j_c = -offset / drift
    half = K / abs(drift) + 2.0
    lo, hi = math.floor(j_c - half), math.ceil(j_c + half) + 1
    a, b = u.positions(lo, hi), v.positions(lo, hi)
    return len(crossing_events(b - a, 1.0 + np.abs(a) + np.abs(b), cyclic=False))


def at_most_one_crossing_check(portrait: Portrait, depinned_inits=None, n_pairs: int = 1000,
                               seed: int = 0) -> CheckResult:
    """No sampled attractor configuration crosses a depinned one more than once.

    Pairs ``(u, S_{m,n} v)`` are drawn with ``u`` from the depinned runs, ``v``
    from all retained configurations, ``m`` uniform over ``v``'s period and ``n``
    within one of the offset that best aligns the two at site 0.
    """
    if depinned_inits is None:
        depinned_inits = sorted(set(int(i) for i in portrait.init))
    us = portrait.configurations(set(depinned_inits))
    vs = portrait.configurations()
    if not us or not vs:
        return CheckResult(True, None, 0)
    rng = np.random.default_rng(seed)
    for k in range(n_pairs):
        iu, iv = rng.integers(len(us)), rng.integers(len(vs))
        u, v = us[iu], vs[iv]
        m = int(rng.integers(v.q))
        vm = translate(v, m, 0)
        n = round(float(u.base[0] - vm.base[0])) + int(rng.integers(-1, 2))
        w = translate(vm, 0, n)
        c = pair_crossings(u, w)
        if c > 1:
            return CheckResult(False, (iu, iv, m, n, c), k + 1)
    return CheckResult(True, None, n_pairs)


@dataclass(frozen=True)
class AttractorClassification:
    """Per-run labels and the number of samples in each class."""

    labels: dict
    counts: dict
    unclassified: tuple

    @property
    def ok(self) -> bool:
        return not self.unclassified


def classify_dc_attractor(portrait: Portrait, residual_tol: float = 1e-6,
                          gap_tol: float = 0.02, graph_tol: float = 0.01) -> AttractorClassification:
    """Label every retained DC sample as ``stationary``, ``circle`` or ``unclassified``.

    A sample is stationary when ``max |forces| < residual_tol``; otherwise its
    run must be detected as a circle.
    """
    spec = portrait.model
    if not spec.forcing.is_dc:
        raise ValueError("classification applies to DC forcing")
    circle = {}
    for i in sorted(set(int(a) for a in portrait.init)):
        try:
            circle[i] = kam_circle_detect(portrait, inits=[i], gap_tol=gap_tol, graph_tol=graph_tol).is_circle
        except TooFewPoints:
            circle[i] = False
    labels, counts, bad = {}, {"stationary": 0, "circle": 0, "unclassified": 0}, []
    for i, t, c in portrait.retained:
        if float(np.max(np.abs(forces(c, 0.0, spec)))) < residual_tol:
            lab = "stationary"
        elif circle[i]:
            lab = "circle"
        else:
            lab = "unclassified"
            bad.append((i, t))
        labels[(i, t)] = lab
        counts[lab] += 1
    return AttractorClassification(labels, counts, tuple(bad))
