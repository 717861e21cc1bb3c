import json
from fractions import Fraction

import numpy as np
import pytest

from fkchain.attractor import (PortraitPoint, at_most_one_crossing_check, build_portrait, classify_dc_attractor,
                               depinned_classify, injectivity_check, kam_circle_detect, pair_crossings, project,
                               rotation_number)
from fkchain.dynamics import IntegratorSettings, depinning_force_dynamic
from fkchain.errors import TooFewPoints
from fkchain.model import PeriodicConfiguration, standard_model, translate

from conftest import random_config

S = IntegratorSettings(t_burn=300)


def test_projection_examples():
    assert project(PeriodicConfiguration([0.25, 0.85], 0)) == pytest.approx((0.25, 0.6))
    assert project(PeriodicConfiguration([1.25, 1.85], 0)) == pytest.approx((0.25, 0.6))
    c = PeriodicConfiguration.uniform(1, 2, 0.3)
    assert project(c, 0) == pytest.approx((0.3, 0.5))
    assert project(c, 1) == pytest.approx((0.8, 0.5))


def test_rotation_number_of_periodic_orbits():
    c = PeriodicConfiguration.uniform(1, 2, 0.1)
    assert rotation_number([project(c, j) for j in range(2)]) == pytest.approx(0.5)
    rng = np.random.default_rng(0)
    c = random_config(rng, 245, 397, 0.2)
    pts = [PortraitPoint(*project(c, j), 0, 0) for j in range(397)]
    assert rotation_number(pts) == pytest.approx(245 / 397, abs=1e-12)
    shifted = [project(translate(c, 5, 2), j) for j in range(397)]
    assert rotation_number(shifted) == pytest.approx(rotation_number(pts), abs=1e-12)
    with pytest.raises(TooFewPoints):
        rotation_number([(0.1, 0.2)])


def test_free_chain_portrait_is_flat_circle():
    rng = np.random.default_rng(1)
    rho = Fraction(21, 34)
    c = random_config(rng, rho.numerator, rho.denominator, 0.2)
    P = build_portrait([c], standard_model(k=0.0, F_DC=0.1), IntegratorSettings(t_burn=1000), samples=20)
    assert np.allclose(P.pspace, float(rho), rtol=0, atol=1e-9)
    rep = kam_circle_detect(P)
    assert rep.is_circle and rep.max_spread < 1e-9
    assert depinned_classify(P, rho) == "depinned"


def test_pinned_period_two_is_not_circle():
    rng = np.random.default_rng(2)
    P = build_portrait([random_config(rng, 1, 2)], standard_model(k=1.0), S, samples=100)
    rep = kam_circle_detect(P)
    assert not rep.is_circle
    assert 0.4 < rep.max_gap < 0.6
    assert depinned_classify(P, "1/2") == "pinned"


def test_circle_detect_needs_points():
    with pytest.raises(TooFewPoints):
        kam_circle_detect((np.linspace(0, 1, 20), np.zeros(20)))


def test_two_branches_are_not_a_graph():
    x = np.linspace(0, 1, 400, endpoint=False)
    p = np.where(np.arange(400) % 2 == 0, 0.5, 0.6)
    assert not kam_circle_detect((x, p)).is_circle
    # a steep but single-valued curve is accepted
    assert kam_circle_detect((x, 0.6 + 0.12 * np.sin(2 * np.pi * x))).is_circle


def test_single_particle_pinned_classification():
    P = build_portrait([PeriodicConfiguration([0.2], 0)], standard_model(F_DC=0.05), S, samples=100)
    assert depinned_classify(P, 0) == "pinned"


CELLS = [("1/2", 0.005), ("1/2", 0.06), ("1/3", 0.002), ("1/3", 0.05), ("0", 0.1), ("0", 0.3),
         ("2/5", 0.0003), ("2/5", 0.05), ("3/4", 0.002), ("3/4", 0.08)]


@pytest.mark.parametrize("rho,F", CELLS)
def test_classification_matches_dynamic_threshold(rho, F):
    rho = Fraction(rho)
    Fc = depinning_force_dynamic(standard_model(), rho, tol=1e-4)
    assert abs(F - Fc) > 1e-3  # cells away from the threshold
    rng = np.random.default_rng(3)
    c = random_config(rng, rho.numerator, rho.denominator)
    P = build_portrait([c], standard_model(F_DC=F), IntegratorSettings(t_burn=500), samples=400)
    expected = "depinned" if F > Fc else "pinned"
    assert depinned_classify(P, rho, bins=50) == expected


def test_injectivity_single_synchronized_orbit_and_negative_control():
    rng = np.random.default_rng(4)
    P = build_portrait([random_config(rng, 5, 8)], standard_model(F_DC=0.2), S, samples=100, retain_every=1)
    res = injectivity_check(P, pi_tol=5e-3, config_tol=5e-2)
    assert res.passed and res.n_checked > 0
    b = P.retained[0][2].base.copy()
    b2 = b.copy()
    b2[4] += 0.3
    bad = P.with_retained([(7, 0, PeriodicConfiguration(b, 5)), (7, 1, PeriodicConfiguration(b2, 5))])
    res = injectivity_check(bad)
    assert not res.passed
    assert any(w[:2] == (7, 1) for w in res.witness)


def test_translates_of_synchronized_orbit_do_not_cross():
    rng = np.random.default_rng(5)
    P = build_portrait([random_config(rng, 5, 8)], standard_model(F_DC=0.2), S, samples=20, retain_every=5)
    u = P.retained[-1][2]
    for m in range(8):
        for n in range(-2, 3):
            assert pair_crossings(u, translate(u, m, n)) == 0
    assert at_most_one_crossing_check(P, n_pairs=200).passed


def test_pair_crossings_different_spacing():
    u = PeriodicConfiguration.uniform(0, 1, 0.3)
    v = PeriodicConfiguration.uniform(1, 3, 0.0)
    assert pair_crossings(u, v) == 1


def test_transient_may_cross_more_than_once():
    """Before burn-in a configuration can cross a synchronized one repeatedly."""
    u = PeriodicConfiguration.uniform(1, 2, 0.0)
    v = PeriodicConfiguration(np.array([0.3, 0.2, 1.3, 1.2]) - 0.25, 2)
    assert pair_crossings(u, v) > 1


def test_dc_classification_mixed_portrait():
    rng = np.random.default_rng(6)
    inits = [random_config(rng, 1, 2), random_config(rng, 5, 8)]
    P = build_portrait(inits, standard_model(F_DC=0.01), IntegratorSettings(t_burn=500), samples=200,
                       retain_every=1)
    cl = classify_dc_attractor(P)
    assert cl.ok
    assert cl.counts["stationary"] == 200 and cl.counts["circle"] == 200
    with pytest.raises(ValueError):
        classify_dc_attractor(build_portrait(inits[:1], standard_model(F_AC=0.1), S, samples=2))


def test_portrait_serialization_is_deterministic():
    rng = np.random.default_rng(7)
    c = random_config(rng, 2, 3)
    a = build_portrait([c], standard_model(F_DC=0.05), S, samples=5, retain_every=2)
    b = build_portrait([c], standard_model(F_DC=0.05), S, samples=5, retain_every=2)
    assert a.to_json() == b.to_json()
    doc = json.loads(a.to_json())
    assert len(doc["points"]) == 15 and len(doc["retained_configs"]) == 3
    rows = list(a.csv_rows())
    assert rows[0] == ("x", "p", "orbit", "t") and len(rows) == 16
