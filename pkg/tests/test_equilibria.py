import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fkchain.equilibria import (RESIDUAL_TOL, canonical_base, continue_branch, depinning_force_bands,
                                enumerate_stationary, find_stationary, is_pinned, jacobian, minimal_period,
                                pinned_set, residual, rotation_band, same_orbit, stability, type_order)
from fkchain.errors import NewtonDiverged
from fkchain.intersect import defect_count
from fkchain.model import ModelError, PeriodicConfiguration, standard_model, translate

TWO_PI = 2 * math.pi


def exact_band(u):
    """Rotation band evaluated in exact rational arithmetic on the float positions."""
    q, p = u.q, u.p
    lo = hi = None
    for k in range(1, q + 1):
        for j in range(q):
            x = Fraction(u[j + k]) - Fraction(u[j]) if k < q else Fraction(p)
            cs = math.floor(x) + 1
            fs = math.ceil(x) - 1
            lo = Fraction(cs, k) if lo is None else min(lo, Fraction(cs, k))
            hi = Fraction(fs, k) if hi is None else max(hi, Fraction(fs, k))
    return (lo, hi) if lo <= hi else None


def mod1_set(cs):
    return sorted(round(c.base[0] % 1.0, 9) % 1.0 for c in cs)


@pytest.mark.parametrize("seed_x,expected", [(0.1, 0.0), (0.4, 0.5), (0.9, 1.0)])
def test_single_particle_critical_points(seed_x, expected):
    c = find_stationary(standard_model(), 0, 1, PeriodicConfiguration([seed_x], 0))
    assert c.base[0] == pytest.approx(expected, abs=1e-12)


def test_single_particle_tilted_roots():
    F = 0.1
    a = math.asin(F * TWO_PI) / TWO_PI
    roots = sorted([(-a) % 1.0, (0.5 + a) % 1.0])
    found = sorted(find_stationary(standard_model(F_DC=F), 0, 1, PeriodicConfiguration([x], 0)).base[0] % 1.0
                   for x in (roots[0] + 0.05, roots[1] - 0.05))
    assert found == pytest.approx(roots, abs=1e-12)


def test_no_equilibrium_above_threshold():
    with pytest.raises(NewtonDiverged):
        find_stationary(standard_model(F_DC=0.2), 0, 1, PeriodicConfiguration([0.3], 0))


def test_find_stationary_rejects_ac_and_type_mismatch():
    with pytest.raises(ModelError):
        find_stationary(standard_model(F_AC=0.1), 0, 1, PeriodicConfiguration([0.3], 0))
    with pytest.raises(ModelError):
        find_stationary(standard_model(), 1, 2, PeriodicConfiguration([0.3], 0))


@pytest.mark.parametrize("p,q", [(0, 1), (1, 1), (1, 2), (2, 5)])
def test_jacobian_matches_finite_differences(p, q):
    rng = np.random.default_rng(q)
    spec = standard_model(k=1.3, F_DC=0.05)
    c = PeriodicConfiguration(np.arange(q) * p / q + rng.uniform(-0.2, 0.2, q), p)
    J = jacobian(c, spec)
    h = 1e-6
    num = np.empty((q, q))
    for j in range(q):
        e = np.zeros(q)
        e[j] = h
        num[:, j] = (residual(c.with_base(c.base + e), spec) - residual(c.with_base(c.base - e), spec)) / (2 * h)
    assert np.allclose(J, num, atol=1e-7)
    assert np.allclose(J, J.T)


def test_enumeration_single_period():
    found = enumerate_stationary(standard_model(), 1, seeds_per_type=8)
    zero = [c for c in found if c.p == 0]
    assert mod1_set(zero) == pytest.approx([0.0, 0.5], abs=1e-9)
    for c in found:
        assert np.max(np.abs(residual(c, standard_model()))) <= RESIDUAL_TOL


def test_enumeration_without_potential_is_uniform():
    found = enumerate_stationary(standard_model(k=0.0), 4, seeds_per_type=4, types=[(1, 2), (1, 3), (0, 1)])
    for c in found:
        assert np.allclose(c.spacings(), float(c.rho), atol=1e-9)
        assert rotation_band(c) is None


def test_disordered_period_three_solutions():
    """Strong potential: mixtures of well and hill sites survive and carry nonempty bands."""
    spec = standard_model(k=10.0)
    found = enumerate_stationary(spec, 3, seeds_per_type=16)
    disordered = [c for c in found if defect_count(c) > 0]
    assert disordered
    with_band = [(c, rotation_band(c)) for c in disordered]
    with_band = [(c, b) for c, b in with_band if b is not None]
    assert {(c.p, c.q) for c, _ in with_band} >= {(0, 3), (1, 3)}
    for c, b in with_band:
        assert (b.lo, b.hi) == exact_band(c)
        assert c.rho in b


def test_band_examples():
    assert rotation_band(PeriodicConfiguration([0.0], 0)) is None
    for p in range(-2, 3):
        assert rotation_band(PeriodicConfiguration([0.3], p)) is None
    # a window stretched by more than one unit beyond the mean gives r+ >= rho
    u = PeriodicConfiguration([0.0, 1.4, 1.5], 1)
    b = rotation_band(u)
    assert b is not None and b.hi >= u.rho
    assert (b.lo, b.hi) == exact_band(u)


@settings(max_examples=80)
@given(st.integers(1, 6), st.integers(-3, 6), st.lists(st.floats(-1.5, 1.5), min_size=6, max_size=6))
def test_band_matches_exact_arithmetic(q, p, vals):
    u = PeriodicConfiguration(np.arange(q) * p / q + np.array(vals[:q]), p)
    d = np.array([u[j + k] - u[j] for j in range(q) for k in range(1, q)])
    if d.size and np.min(np.abs(d - np.round(d))) <= 1e-9:
        return  # snapped differences intentionally differ from exact arithmetic on floats
    b = rotation_band(u)
    exact = exact_band(u)
    assert (None if b is None else (b.lo, b.hi)) == exact


def test_band_snaps_near_integers():
    u = PeriodicConfiguration([0.0, 2.0 + 1e-12, 2.5], 1)
    b = rotation_band(u)
    assert b.flagged
    assert (b.lo, b.hi) == exact_band(PeriodicConfiguration([0.0, 2.0, 2.5], 1)) == (-1, 1)


def test_pinned_set_without_potential_is_empty():
    assert pinned_set(standard_model(k=0.0), q_max=5, seeds_per_type=4).intervals == ()


def test_pinned_set_at_moderate_force():
    ps = pinned_set(standard_model(F_DC=0.05), q_max=8, seeds_per_type=8)
    assert 0 in ps
    assert ps.to_json() and all(len(iv) == 4 for iv in ps.to_json())
    lo, hi = ps.intervals[0]
    assert lo <= hi


def test_not_pinned_above_single_particle_threshold():
    assert is_pinned(standard_model(F_DC=0.2), 0, q_max=8, seeds_per_type=8) is None


def test_pinned_set_monotone_in_q_max():
    spec = standard_model(F_DC=0.03)
    small = pinned_set(spec, q_max=4, seeds_per_type=8)
    large = pinned_set(spec, q_max=6, seeds_per_type=8)
    for lo, hi in small.intervals:
        assert any(a <= lo and hi <= b for a, b in large.intervals)


def test_band_depinning_without_potential():
    assert depinning_force_bands(standard_model(k=0.0), "1/2", q_max=4) == 0.0


def test_type_order():
    order = type_order(Fraction(1, 2), 4)
    assert order[0] == (1, 2)
    assert set(order) == {(p, q) for q in range(1, 5) for p in range(q + 1)}


def test_orbit_helpers():
    c = PeriodicConfiguration([0.1, 0.7], 1).repeat(3)
    m = minimal_period(c)
    assert (m.p, m.q) == (1, 2)
    assert same_orbit(m, translate(m, 1, 2))
    assert not same_orbit(m, m.shifted(0.01))
    assert np.allclose(canonical_base(m), canonical_base(translate(m, 3, -1)))


def test_stability_of_wells_and_hills():
    spec = standard_model()
    # the force is +V', so the minimum of V is a maximum of the energy
    assert stability(PeriodicConfiguration([0.5], 0), spec) == "stable"
    assert stability(PeriodicConfiguration([0.0], 0), spec) == "unstable"


def test_branch_continuation_to_fold():
    spec = standard_model()
    Fs = np.linspace(0.0, 0.2, 41)
    br = continue_branch(spec, PeriodicConfiguration([0.5], 0), Fs)
    assert br.type == (0, 1)
    assert br.forces[-1] < 1 / TWO_PI < br.forces[-1] + 0.0051
    for F, c in zip(br.forces, br.configurations):
        assert math.sin(TWO_PI * c.base[0]) / TWO_PI == pytest.approx(-F, abs=1e-12)
    assert all(t in ("stable", "fold") for t in br.stability)
