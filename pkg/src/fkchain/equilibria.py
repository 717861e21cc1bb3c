"""Stationary periodic configurations of the DC-driven chain and rotation bands.

A stationary (p, q)-periodic configuration is a critical point of the energy tilted
by the DC force. Its rotation band ``[r-, r+]`` is built from the strict ceiling
and floor of position differences,

    r- = min_{j, k=1..q} ceil*(u_{j+k} - u_j) / k,
    r+ = max_{j, k=1..q} floor*(u_{j+k} - u_j) / k,

where ``ceil*(x)`` is the smallest integer strictly larger than ``x`` and
``floor*(x)`` the largest strictly smaller. A mean spacing ``rho`` is pinned at
force ``F`` exactly when some band at ``F`` contains it.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np

from .errors import BracketInvalid, NewtonDiverged
from .model import ModelError, ModelSpec, PeriodicConfiguration, as_fraction, forces

log = logging.getLogger(__name__)

__all__ = [
    "RESIDUAL_TOL",
    "RotationBand",
    "PinnedSet",
    "StationaryBranch",
    "residual",
    "jacobian",
    "find_stationary",
    "minimal_period",
    "same_orbit",
    "canonical_base",
    "enumerate_stationary",
    "rotation_band",
    "pinned_set",
    "is_pinned",
    "depinning_force_bands",
    "stability",
    "continue_branch",
    "type_order",
]

RESIDUAL_TOL = 1e-12
INTEGER_SNAP = 1e-9
DEDUP_TOL = 1e-8
_MAX_ITER = 50


def _require_dc(spec: ModelSpec):
    if not spec.forcing.is_dc:
        raise ModelError("stationary configurations need DC forcing (F_AC = 0)")


def _spacings(U, p):
    d = np.empty_like(U)
    d[..., :-1] = U[..., 1:] - U[..., :-1]
    d[..., -1] = U[..., 0] + p - U[..., -1]
    return d


def _residual_batch(U, p, spec):
    dw = spec.dW(_spacings(U, p))
    return dw - np.roll(dw, 1, axis=-1) + spec.dV(U) + spec.forcing.F_DC


def _jacobian_batch(U, p, spec):
    """Jacobian of the residual; cyclic tridiagonal, stacked over the leading axis."""
    S, q = U.shape
    w2 = spec.d2W(_spacings(U, p))
    J = np.zeros((S, q, q))
    i = np.arange(q)
    J[:, i, i] = -w2 - np.roll(w2, 1, axis=-1) + spec.d2V(U)
    nxt = (i + 1) % q
    # accumulate so that q <= 2, where neighbours coincide, comes out right
    np.add.at(J, (slice(None), i, nxt), w2)
    np.add.at(J, (slice(None), nxt, i), w2)
    return J


def residual(c: PeriodicConfiguration, spec: ModelSpec) -> np.ndarray:
    """Stationarity residual ``G_j(u)``: the DC right-hand side at every base site."""
    _require_dc(spec)
    return forces(c, 0.0, spec)


def jacobian(c: PeriodicConfiguration, spec: ModelSpec) -> np.ndarray:
    return _jacobian_batch(c.base[None, :], c.p, spec)[0]


def _deflation(U, roots, p):
    """Deflation factors ``M = prod(1 + 1/|u - r|^2)`` and ``grad log M`` per row.

    Distances are taken to the nearest lift of every known root over all
    translates, so the operator is invariant under the symmetry group.
    """
    S, q = U.shape
    logM = np.zeros(S)
    g = np.zeros_like(U)
    for r in roots:
        best = np.full(S, np.inf)
        diff_best = np.zeros_like(U)
        for m in range(q):
            idx = np.arange(-m, q - m)
            d_, r_ = np.divmod(idx, q)
            shifted = r[r_] + d_ * p
            diff = U - shifted[None, :]
            diff -= np.round(diff.mean(axis=1))[:, None]
            dist2 = np.sum(diff * diff, axis=1)
            take = dist2 < best
            best[take] = dist2[take]
            diff_best[take] = diff[take]
        best = np.maximum(best, 1e-300)
        f = 1.0 + 1.0 / best
        logM += np.log(f)
        g += (-2.0 / best**2 / f)[:, None] * diff_best
    return logM, g


def _newton_batch(U0, p, spec, roots=(), max_iter=_MAX_ITER, tol=RESIDUAL_TOL):
    """Damped Newton on a stack of seeds; returns (U, converged mask).

    With ``roots`` the step is rescaled by the deflation factor
    ``1 / (1 - grad(log M) . delta)``, which repels iterates from known solutions.
    """
    U = np.array(U0, dtype=float)
    S, q = U.shape
    active = np.ones(S, dtype=bool)
    done = np.zeros(S, dtype=bool)
    G = _residual_batch(U, p, spec)
    nrm = np.max(np.abs(G), axis=1)
    for _ in range(max_iter):
        done |= nrm <= tol
        active &= ~done
        if not active.any():
            break
        ia = np.flatnonzero(active)
        J = _jacobian_batch(U[ia], p, spec)
        try:
            delta = -np.linalg.solve(J, G[ia][..., None])[..., 0]
        except np.linalg.LinAlgError:
            delta = np.empty((ia.size, q))
            for r, i in enumerate(ia):
                delta[r] = -np.linalg.lstsq(J[r], G[i], rcond=None)[0]
        if roots:
            _, gl = _deflation(U[ia], roots, p)
            denom = 1.0 - np.sum(gl * delta, axis=1)
            denom = np.where(np.abs(denom) < 1e-12, 1e-12, denom)
            delta = delta / denom[:, None]
        # backtracking on the residual max-norm; seeds that cannot decrease it stall out
        lam = np.ones(ia.size)
        Unew = U[ia] + delta
        Gnew = _residual_batch(Unew, p, spec)
        nnew = np.max(np.abs(Gnew), axis=1)
        for _ in range(6):
            bad = ~(nnew < nrm[ia]) & (nnew > tol)
            if not bad.any():
                break
            lam[bad] *= 0.5
            Unew[bad] = U[ia][bad] + lam[bad, None] * delta[bad]
            Gnew[bad] = _residual_batch(Unew[bad], p, spec)
            nnew[bad] = np.max(np.abs(Gnew[bad]), axis=1)
        ok = np.all(np.isfinite(Unew), axis=1) & ((nnew < nrm[ia]) | (nnew <= tol))
        U[ia[ok]] = Unew[ok]
        G[ia[ok]] = Gnew[ok]
        nrm[ia[ok]] = nnew[ok]
        active[ia[~ok]] = False
        # seeds drifting to huge widths are abandoned
        wild = np.abs(U - U[:, :1]).max(axis=1) > 10.0 * (q + abs(p) + 1)
        active &= ~wild
    done |= nrm <= tol
    return U, done


def find_stationary(spec: ModelSpec, p: int, q: int, seed: PeriodicConfiguration,
                    max_iter: int = _MAX_ITER) -> PeriodicConfiguration:
    """Newton iteration from ``seed`` to ``max |G| <= 1e-12``.

    Minima and saddles are both returned, depending on the seed.

    Raises
    ------
    NewtonDiverged
        After ``max_iter`` iterations without reaching the tolerance.
    """
    _require_dc(spec)
    if seed.q != q or seed.p != p:
        raise ModelError(f"seed has type ({seed.p},{seed.q}), expected ({p},{q})")
    U, ok = _newton_batch(seed.base[None, :], p, spec, max_iter=max_iter)
    if not ok[0]:
        raise NewtonDiverged(f"no convergence for type ({p},{q}) after {max_iter} iterations")
    return PeriodicConfiguration(U[0], p)


def minimal_period(c: PeriodicConfiguration, tol: float = 1e-9) -> PeriodicConfiguration:
    """The same infinite configuration written over its smallest period."""
    q, p = c.q, c.p
    for d in range(1, q):
        if q % d or (p * d) % q:
            continue
        pd = p * d // q
        if np.all(np.abs(c.positions(d, q + d) - c.base - pd) <= tol):
            return PeriodicConfiguration(c.base[:d], pd)
    return c


def _translates(c: PeriodicConfiguration) -> Iterator[np.ndarray]:
    for m in range(c.q):
        yield c.positions(-m, c.q - m)


def same_orbit(a: PeriodicConfiguration, b: PeriodicConfiguration, tol: float = DEDUP_TOL) -> bool:
    """Whether ``b = S_{m,n} a`` for some integers ``m, n`` (positional tolerance ``tol``)."""
    if a.q != b.q or a.p != b.p:
        return False
    for w in _translates(b):
        diff = w - a.base
        n = round(float(diff[0]))
        if np.max(np.abs(diff - n)) <= tol:
            return True
    return False


def canonical_base(c: PeriodicConfiguration) -> np.ndarray:
    """Lexicographically minimal translate with ``u_0`` in ``[0, 1)``."""
    best = None
    for w in _translates(c):
        w = w - math.floor(w[0])
        key = np.round(w, 8)
        if best is None or tuple(key) < tuple(best[0]):
            best = (key, w)
    return best[1]


def _seeds(p, q, n_random, rng):
    j = np.arange(q)
    lin = j * (p / q)
    seeds = [lin, lin + 0.5]
    if q == 1 and p == 0:
        seeds += [np.array([0.25]), np.array([0.75])]
    for i in range(n_random):
        x0 = rng.uniform()
        if i % 2 == 0 and q > 1:
            m = rng.integers(1, q // 2 + 1)
            A = rng.uniform(0.02, 0.5)
            seeds.append(lin + x0 + A * np.cos(2 * np.pi * m * j / q + rng.uniform(0, 2 * np.pi)))
        else:
            seeds.append(lin + x0 + rng.uniform(-0.5, 0.5, size=q))
    return np.array(seeds)


def _type_rng(seed, p, q):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, p, q]))


def _solve_type(spec, p, q, seeds_per_type, seed, deflation_rounds):
    """Distinct (up to translation) solutions of one (p, q) type, not yet reduced."""
    rng = _type_rng(seed, p, q)
    S0 = _seeds(p, q, seeds_per_type, rng)
    found: list[np.ndarray] = []

    def absorb(U, ok):
        new = 0
        for u in U[ok]:
            c = PeriodicConfiguration(u, p)
            if not any(same_orbit(PeriodicConfiguration(r, p), c) for r in found):
                found.append(u)
                new += 1
        return new

    U, ok = _newton_batch(S0, p, spec)
    absorb(U, ok)
    for _ in range(deflation_rounds):
        if not found:
            break
        S1 = S0 + rng.normal(scale=0.05, size=S0.shape)
        U, ok = _newton_batch(S1, p, spec, roots=list(found))
        if absorb(U, ok) == 0:
            break
    return found


def type_order(rho: Fraction, q_max: int) -> list[tuple[int, int]]:
    """All types ``(p, q)``, ``1 <= q <= q_max``, ``0 <= p <= q``, nearest to ``rho`` first.

    Non-reduced types are included: libration orbits around a periodic orbit of
    type ``(a, b)`` have types ``(La, Lb)`` and carry the bands that contain
    ``a/b``.
    """
    types = [(p, q) for q in range(1, q_max + 1) for p in range(0, q + 1)]
    return sorted(types, key=lambda t: (abs(Fraction(t[0], t[1]) - rho), t[1], t[0]))


def enumerate_stationary(spec: ModelSpec, q_max: int, seeds_per_type: int = 16,
                         seed: int = 0, deflation_rounds: int = 1,
                         types: Iterable[tuple[int, int]] | None = None) -> list[PeriodicConfiguration]:
    """Stationary periodic configurations found by multistart Newton with deflation.

    Every type ``(p, q)`` with ``1 <= q <= q_max`` and ``0 <= p <= q`` is seeded
    with the uniform configuration, its half-shift, and ``seeds_per_type``
    random bounded-width seeds (half of them single-harmonic modulations).
    Results are reduced to minimal period and deduplicated modulo translations.
    Seeds depend only on ``(seed, p, q)``, so enlarging ``q_max`` never loses a
    solution.
    """
    _require_dc(spec)
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    if types is None:
        types = [(p, q) for q in range(1, q_max + 1) for p in range(0, q + 1)]
    out: list[PeriodicConfiguration] = []
    for p, q in types:
        for u in _solve_type(spec, p, q, seeds_per_type, seed, deflation_rounds):
            c = minimal_period(PeriodicConfiguration(u, p))
            if not any(same_orbit(o, c) for o in out):
                out.append(c)
    return out


@dataclass(frozen=True)
class RotationBand:
    """Closed rational interval ``[lo, hi]`` with its source configuration.

    ``flagged`` lists ``(j, k, x)`` windows whose difference ``x`` was within
    ``1e-9`` of an integer and was treated as that integer.
    """

    lo: Fraction
    hi: Fraction
    source: PeriodicConfiguration | None = None
    flagged: tuple = ()

    def __contains__(self, rho) -> bool:
        rho = as_fraction(rho)
        return self.lo <= rho <= self.hi


def rotation_band(u: PeriodicConfiguration, snap: float = INTEGER_SNAP) -> RotationBand | None:
    """Rotation band of a stationary configuration, or ``None`` when ``r- > r+``.

    The window ``k = q`` has difference exactly ``p`` by periodicity. Differences
    within ``snap`` of an integer are treated as that integer (strict ceiling
    ``x + 1``, strict floor ``x - 1``) and reported in ``flagged``.
    """
    q, p = u.q, u.p
    j = np.arange(q)
    lo = hi = None
    flagged = []
    for k in range(1, q + 1):
        if k == q:
            x = np.full(q, float(p))
        else:
            jk = j + k
            x = u.base[jk % q] + p * (jk // q) - u.base
        r = np.round(x)
        near = np.abs(x - r) <= snap
        if k == q:
            near[:] = True
        ceil_s = np.where(near, r + 1, np.floor(x) + 1)
        floor_s = np.where(near, r - 1, np.ceil(x) - 1)
        if k < q:
            flagged += [(int(a), k, float(x[a])) for a in np.flatnonzero(near)]
        lo_k = Fraction(int(ceil_s.min()), k)
        hi_k = Fraction(int(floor_s.max()), k)
        lo = lo_k if lo is None else min(lo, lo_k)
        hi = hi_k if hi is None else max(hi, hi_k)
    if lo > hi:
        return None
    return RotationBand(lo, hi, u, tuple(flagged))


def _merge(intervals):
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return tuple(out)


@dataclass(frozen=True)
class PinnedSet:
    """Union of closed rotation bands, merged; exact membership for rationals."""

    intervals: tuple[tuple[Fraction, Fraction], ...]
    q_max: int
    F_DC: float
    bands: tuple[RotationBand, ...] = field(default=(), repr=False, compare=False)

    def __contains__(self, rho) -> bool:
        rho = as_fraction(rho)
        return any(lo <= rho <= hi for lo, hi in self.intervals)

    def to_json(self):
        return [[lo.numerator, lo.denominator, hi.numerator, hi.denominator]
                for lo, hi in self.intervals]


def pinned_set(spec: ModelSpec, q_max: int = 34, seeds_per_type: int = 16, seed: int = 0,
               deflation_rounds: int = 1) -> PinnedSet:
    """Union of the nonempty rotation bands of all enumerated stationary configurations."""
    confs = enumerate_stationary(spec, q_max, seeds_per_type, seed, deflation_rounds)
    bands = tuple(b for b in map(rotation_band, confs) if b is not None)
    return PinnedSet(_merge((b.lo, b.hi) for b in bands), q_max, spec.forcing.F_DC, bands)


def is_pinned(spec: ModelSpec, rho, q_max: int = 34, seeds_per_type: int = 16, seed: int = 0,
              deflation_rounds: int = 1) -> RotationBand | None:
    """A band containing ``rho``, searching types nearest to ``rho`` first.

    Returns ``None`` when no band of any type up to ``q_max`` contains ``rho``.
    Equivalent to ``rho in pinned_set(...)`` but stops at the first witness.
    """
    _require_dc(spec)
    rho = as_fraction(rho)
    for p, q in type_order(rho, q_max):
        for u in _solve_type(spec, p, q, seeds_per_type, seed, deflation_rounds):
            b = rotation_band(minimal_period(PeriodicConfiguration(u, p)))
            if b is not None and rho in b:
                return b
    return None


def depinning_force_bands(spec_template: ModelSpec, rho, q_max: int = 34, tol: float = 1e-4,
                          F_lo: float = 0.0, F_hi: float | None = None,
                          seeds_per_type: int = 16, seed: int = 0, deflation_rounds: int = 1) -> float:
    """Critical DC force from the rotation-band criterion, by bisection.

    ``F_hi`` defaults to just above ``max |V'|``; beyond it no stationary
    configuration exists (the forces summed over a period cannot vanish). If
    ``rho`` is not pinned at ``F_lo`` the threshold is ``F_lo`` itself.

    Raises
    ------
    BracketInvalid
        If ``rho`` is still pinned at ``F_hi`` or the bracket is empty.
    """
    from .dynamics import max_onsite_force

    rho = as_fraction(rho)
    if F_hi is None:
        F_hi = 1.01 * max_onsite_force(spec_template) + 1e-9
    if not (tol > 0 and F_lo < F_hi):
        raise BracketInvalid(f"need F_lo < F_hi and tol > 0, got [{F_lo}, {F_hi}], tol={tol}")

    def pinned(F):
        b = is_pinned(spec_template.with_forcing(F_DC=F, F_AC=0.0), rho, q_max, seeds_per_type, seed,
                      deflation_rounds)
        log.debug("F_DC=%.8f pinned=%s", F, b is not None and (b.lo, b.hi))
        return b is not None

    if pinned(F_hi):
        raise BracketInvalid(f"rho={rho} still pinned at F_hi={F_hi}")
    if not pinned(F_lo):
        return float(F_lo)
    while F_hi - F_lo > tol:
        mid = 0.5 * (F_lo + F_hi)
        if pinned(mid):
            F_lo = mid
        else:
            F_hi = mid
    return 0.5 * (F_lo + F_hi)


def stability(c: PeriodicConfiguration, spec: ModelSpec, fold_tol: float = 1e-7) -> str:
    """``stable`` if the Jacobian is negative definite, ``fold`` if nearly singular."""
    ev = np.linalg.eigvalsh(jacobian(c, spec))
    # the symmetric Jacobian has no translation zero mode while V is nonzero
    if np.min(np.abs(ev)) <= fold_tol * max(1.0, np.max(np.abs(ev))):
        return "fold"
    return "stable" if ev.max() < 0 else "unstable"


@dataclass(frozen=True)
class StationaryBranch:
    """A branch of stationary configurations continued in ``F_DC``."""

    type: tuple[int, int]
    forces: tuple[float, ...]
    configurations: tuple[PeriodicConfiguration, ...]
    stability: tuple[str, ...]


def continue_branch(spec: ModelSpec, seed: PeriodicConfiguration,
                    forces_: Iterable[float]) -> StationaryBranch:
    """Natural-parameter continuation from ``seed`` through the given forces.

    Stops at the first force where Newton fails (past a fold); the last point
    before it is tagged ``fold`` when the smallest Jacobian eigenvalue is within
    1e-3 of zero relative to the spectrum.
    """
    c = seed
    Fs, cs, tags = [], [], []
    for F in forces_:
        sp = spec.with_forcing(F_DC=F, F_AC=0.0)
        try:
            c = find_stationary(sp, c.p, c.q, c)
        except NewtonDiverged:
            if tags:
                ev = np.linalg.eigvalsh(jacobian(cs[-1], spec.with_forcing(F_DC=Fs[-1], F_AC=0.0)))
                if np.min(np.abs(ev)) <= 1e-3 * np.max(np.abs(ev)):
                    tags[-1] = "fold"
            break
        Fs.append(float(F))
        cs.append(c)
        tags.append(stability(c, sp))
    return StationaryBranch((seed.p, seed.q), tuple(Fs), tuple(cs), tuple(tags))
