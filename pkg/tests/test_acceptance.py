"""Acceptance criteria 1-9. Each test prints one ``criterion N PASS/FAIL`` line.

Oracle values are analytic (single-particle law and threshold), cross-method
(velocity bisection against rotation bands) or frozen golden summaries.
"""
import json
import math
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from acceptance_log import criterion
from conftest import random_config
from golden_support import PANEL_FORCES, four_panel_summary

from fkchain.attractor import (at_most_one_crossing_check, build_portrait, classify_dc_attractor,
                               injectivity_check, kam_circle_detect, rotation_number)
from fkchain.defects import defect_relaxation_test, defected_initializer
from fkchain.dynamics import (IntegratorSettings, NotConverged, average_velocity, depinning_force_dynamic,
                              integrate, synchronization_check)
from fkchain.equilibria import depinning_force_bands
from fkchain.intersect import EmpiricalEnsemble, monotonicity_series
from fkchain.model import PeriodicConfiguration, standard_model

TWO_PI = 2 * math.pi
GOLDEN = Path(__file__).parent / "golden"


def test_criterion_1_single_particle_velocity():
    with criterion(1, "single-particle velocity law, k=1") as info:
        for F in (0.2, 0.3, 0.5):
            est = average_velocity(PeriodicConfiguration([0.0], 0), standard_model(k=1.0, F_DC=F))
            exact = math.sqrt(F * F - 1 / TWO_PI ** 2)
            info.append(f"F={F}: v={est.v:.6f} exact={exact:.6f}")
            assert est.converged
            assert abs(est.v - exact) <= 1e-3


def test_criterion_2_single_particle_depinning():
    t0 = time.time()
    with criterion(2, "single-particle depinning, dynamic and band estimates") as info:
        spec = standard_model(k=1.0)
        exact = 1 / TWO_PI
        Fd = depinning_force_dynamic(spec, 0, tol=1e-5)
        info.append(f"dynamic err={Fd - exact:+.2e}")
        assert abs(Fd - exact) <= 1e-4
        band = {}
        for qm in (8, 14, 16, 34):
            band[qm] = depinning_force_bands(spec, 0, q_max=qm, tol=1e-4)
        info.append(", ".join(f"bands q_max={qm} err={band[qm] - exact:+.2e}" for qm in band))
        # more periodic configurations can only extend the bands
        vals = [band[qm] for qm in sorted(band)]
        assert all(b >= a - 1e-4 for a, b in zip(vals, vals[1:]))
        for qm in (14, 16, 34):
            assert abs(band[qm] - exact) <= 5e-3
        info.append(f"{time.time() - t0:.0f}s")


def test_criterion_3_cross_oracle():
    with criterion(3, "cross-oracle phase boundary, velocity bisection vs rotation bands") as info:
        for rho, k in (("1/2", 1.0), ("1/3", 1.0), ("0", 0.5)):
            spec = standard_model(k=k)
            Fd = depinning_force_dynamic(spec, rho, tol=1e-5)
            Fb = depinning_force_bands(spec, rho, q_max=34, tol=1e-4)
            info.append(f"rho={rho} k={k}: dynamic={Fd:.6f} bands={Fb:.6f} diff={abs(Fd - Fb):.2e}")
            assert abs(Fd - Fb) <= 5e-3


def test_criterion_4_lyapunov_monotonicity():
    with criterion(4, "intersection functional non-increasing, tangency drops") as info:
        spec = standard_model(k=1.0, F_DC=0.2)
        times = np.linspace(0.0, 40.0, 21)
        worst = -np.inf
        for k in range(50):
            rng = np.random.default_rng(np.random.SeedSequence([2024, k]))
            q, p = 16, int(rng.integers(0, 17))
            gens = [random_config(rng, p, q, amp=0.5) for _ in range(6)]
            e = EmpiricalEnsemble.closed(gens)
            ser = monotonicity_series(e, spec, times)
            eps = 2.0 / len(e)
            worst = max(worst, float(np.max(np.diff(ser))))
            assert np.all(np.diff(ser) <= eps), (k, ser)
        info.append(f"50 ensembles, largest increase {worst:.3g}")
        # tangency: v - u >= 0 touching zero at one site
        j = np.arange(16)
        u = PeriodicConfiguration(j * 0.5 + 0.1, 8)
        v = PeriodicConfiguration(u.base + 0.2 * (1 - np.cos(2 * np.pi * j / 16)), 8)
        ser = monotonicity_series(EmpiricalEnsemble.closed([u, v]), spec, [0.0, 0.01, 0.5])
        info.append(f"tangency {ser[0]:.4f} -> {ser[1]:.4f}")
        assert ser[1] < ser[0] - 1e-12
        assert ser[2] <= ser[1]


@pytest.fixture(scope="module")
def depinned_run():
    """rho = 5/8, k = 1, F_DC = 0.2 after burn-in 500."""
    spec = standard_model(k=1.0, F_DC=0.2)
    rng = np.random.default_rng(58)
    c0 = random_config(rng, 5, 8)
    s = IntegratorSettings(t_burn=500)
    P = build_portrait([c0], spec, s, samples=400, retain_every=1)
    traj = integrate(P.retained[0][2], spec, s, t_span=59.0, t0=500.0)
    return spec, P, traj


def test_criterion_5_synchronization(depinned_run):
    with criterion(5, "synchronization after burn-in, rho=5/8") as info:
        _, P, traj = depinned_run
        shifts = [(m, n, s) for m in range(5) for n in range(-2, 3) for s in range(5)]
        res = synchronization_check(traj, shifts)
        info.append(f"{len(shifts)} shifts, {res.n_checked} pair checks")
        assert res.synchronized, res.witness
        res2 = at_most_one_crossing_check(P, n_pairs=1000, seed=0)
        info.append(f"at-most-one-crossing on {res2.n_checked} pairs")
        assert res2.passed, res2.witness


def test_criterion_6_two_dimensional_representation(depinned_run):
    with criterion(6, "injective projection, KAM circle, rotation number, four-panel golden") as info:
        _, P, _ = depinned_run
        inj = injectivity_check(P, pi_tol=1e-6, config_tol=1e-3)
        assert inj.passed, inj.witness
        loose = injectivity_check(P, pi_tol=5e-3, config_tol=5e-2)
        info.append(f"injectivity pairs within 1e-6: {inj.n_checked}, within 5e-3: {loose.n_checked}")
        assert loose.passed and loose.n_checked > 0
        circ = kam_circle_detect(P, gap_tol=0.02)
        info.append(f"circle gap={circ.max_gap:.4f}")
        assert circ.is_circle
        rot = rotation_number(P.points)
        assert abs(rot - 5 / 8) <= 1e-3

        golden = json.loads((GOLDEN / "four_panel_summary.json").read_text())
        got = four_panel_summary()
        counts = [p["n_circles"] for p in got["panels"]]
        info.append(f"circles per panel F={list(PANEL_FORCES)}: {counts}")
        # island -> circle progression
        assert counts[0] == 0 and counts[-1] == len(got["panels"][-1]["runs"])
        assert all(b >= a for a, b in zip(counts, counts[1:]))
        for pg, pw in zip(golden["panels"], got["panels"]):
            assert pg["F_DC"] == pw["F_DC"] and pg["n_circles"] == pw["n_circles"]
            for rg, rw in zip(pg["runs"], pw["runs"]):
                assert rg["rho"] == rw["rho"] and rg["circle"] == rw["circle"]
                assert rw["max_gap"] == pytest.approx(rg["max_gap"], abs=5e-3)
                assert rw["rotation_number"] == pytest.approx(rg["rotation_number"], abs=1e-9)


def test_criterion_7_dc_attractor_classification():
    with criterion(7, "DC attractor samples stationary or on circles, 3x3 grid") as info:
        totals = {"stationary": 0, "circle": 0, "unclassified": 0}
        rng = np.random.default_rng(77)
        for rho in (Fraction(0), Fraction(1, 2), Fraction(5, 8)):
            for F in (0.005, 0.05, 0.4):
                inits = [random_config(rng, rho.numerator, rho.denominator) for _ in range(2)]
                P = build_portrait(inits, standard_model(k=1.0, F_DC=F), IntegratorSettings(t_burn=500),
                                   samples=200, retain_every=1)
                cl = classify_dc_attractor(P)
                for key in totals:
                    totals[key] += cl.counts[key]
                assert cl.ok, (str(rho), F, cl.unclassified[:5])
        info.append(", ".join(f"{k}={v}" for k, v in totals.items()))
        assert totals["unclassified"] == 0


def test_criterion_8_defect_relaxation():
    with criterion(8, "one and two defects on rho=1/2 synchronize, counts non-increasing") as info:
        spec = standard_model(k=1.0, F_DC=0.2)
        for ins in ([(8, -1)], [(8, -1), (24, -1)]):
            init = defected_initializer("1/2", ins, 32)
            r = defect_relaxation_test(init.configuration, spec, t_max=2000)
            info.append(f"{len(ins)} defect(s): count {init.defect_count}, synchronized at t={r.t_sync}")
            assert init.defect_count >= 1
            assert r.status == "synchronized" and r.t_sync <= 2000
            assert r.non_increasing
            counts = [c for _, c in r.trend]
            assert all(b <= a for a, b in zip(counts, counts[1:]))


def _sweep(spec, Fs, c0):
    s = IntegratorSettings(t_burn=200, t_measure=1000)
    out = []
    for F in Fs:
        try:
            est = average_velocity(c0, spec.with_forcing(F_DC=F), s)
        except NotConverged as exc:
            est = exc.estimate
        out.append((est.v, est.confidence_halfwidth))
    return np.array(out)


def _plateaus(Fs, v, tol=1e-4, min_len=3, v_min=1e-3):
    """Runs of at least ``min_len`` consecutive forces with equal positive velocity."""
    runs, start = [], 0
    for i in range(1, len(v) + 1):
        if i == len(v) or abs(v[i] - v[start]) > tol or v[start] < v_min:
            if i - start >= min_len and v[start] >= v_min:
                runs.append((Fs[start], Fs[i - 1], v[start]))
            start = i
    return runs


@pytest.mark.long
def test_criterion_9_velocity_force_curves():
    with criterion(9, "v(F) shapes at rho=245/397: DC threshold and AC plateaus") as info:
        k = 4.0
        c0 = PeriodicConfiguration.uniform(245, 397)
        Fs = np.linspace(0.0, 0.6, 31)
        dc = _sweep(standard_model(k=k), Fs, c0)
        v, hw = dc[:, 0], dc[:, 1]
        moving = v - hw > 1e-4
        first = int(np.argmax(moving))
        info.append(f"k={k}: DC threshold in ({Fs[first - 1]:.2f}, {Fs[first]:.2f}]")
        assert first > 0 and not moving[:first].any() and moving[first:].all()
        assert np.all(np.abs(v[:first]) < 1e-6)
        # monotone within the confidence bands, no jumps
        assert np.all(np.diff(v[first:]) >= -(hw[first:-1] + hw[first + 1:]))
        assert np.max(np.diff(v)) < 0.1
        assert not _plateaus(Fs[first:], v[first:])

        ac = _sweep(standard_model(k=k, F_AC=0.2, nu0=0.2), Fs, c0)
        steps = _plateaus(Fs, ac[:, 0])
        info.append("AC plateaus at v=" + ", ".join(f"{s[2]:.5f}" for s in steps))
        assert len(steps) >= 1
