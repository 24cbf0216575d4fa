"""Costate propagation, switching-function sign rules, singular arcs."""

import json
import math

import numpy as np
import pytest

from qbcharge.dynamics import BangBangProtocol, QubitModel, evolve, state_at
from qbcharge.pmp import (TERMINAL_COSTATE, allowed_level_set, certify_protocol,
                          costate_at, costate_backward, pmp_check,
                          singular_classify, singular_level, switching_function,
                          switching_function_scale_free)

MODEL = QubitModel(omega0=1.0, x=(1.0, 0.0, 0.0), lambda_min=0.0, lambda_max=0.3)
OMEGA_DRIVE = math.sqrt(1.0 + 4 * 0.3 ** 2)   # |rotation axis| at lambda_max
T_STAR = math.pi / OMEGA_DRIVE                # drive orbit peaks here
GROUND = np.array([0.0, 0.0, 1.0])


def random_protocol(rng, tau, bounds=(0.0, 0.3), max_switches=4):
    n = int(rng.integers(0, max_switches + 1))
    ts = tuple(np.sort(rng.uniform(tau * 0.02, tau * 0.98, size=n)))
    levels = tuple(rng.uniform(*bounds, size=n + 1))
    return BangBangProtocol(tau=tau, switch_times=ts, levels=levels)


class TestCostate:
    def test_terminal_value_bit_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            p = random_protocol(rng, tau=float(rng.uniform(2.0, 9.0)))
            cost = costate_backward(MODEL, p)
            assert np.array_equal(cost.b[-1], np.asarray(TERMINAL_COSTATE, dtype=float))

    def test_scale_is_minus_omega0(self):
        p = BangBangProtocol(tau=3.0, switch_times=(), levels=(0.1,))
        assert costate_backward(MODEL, p).scale == -MODEL.omega0

    def test_grid_matches_state_grid(self):
        rng = np.random.default_rng(4)
        p = random_protocol(rng, tau=6.0)
        traj = evolve(GROUND, MODEL, p)
        cost = costate_backward(MODEL, p)
        assert np.array_equal(traj.times, cost.times)

    def test_dot_with_state_conserved(self):
        # a and b rotate about the same instantaneous axis, so a.b is constant
        rng = np.random.default_rng(5)
        for _ in range(6):
            p = random_protocol(rng, tau=float(rng.uniform(1.0, 12.0)))
            traj = evolve(GROUND, MODEL, p)
            cost = costate_backward(MODEL, p)
            dots = np.sum(traj.states * cost.b, axis=1)
            assert np.ptp(dots) < 1e-10

    def test_cross_norm_conserved(self):
        # c = b ^ a obeys the same rotation equation, so |c| is constant too
        rng = np.random.default_rng(6)
        for _ in range(6):
            p = random_protocol(rng, tau=float(rng.uniform(1.0, 12.0)))
            traj = evolve(GROUND, MODEL, p)
            cost = costate_backward(MODEL, p)
            mags = np.linalg.norm(np.cross(cost.b, traj.states), axis=1)
            assert np.ptp(mags) < 1e-10

    def test_costate_at_matches_grid(self):
        rng = np.random.default_rng(7)
        p = random_protocol(rng, tau=5.0)
        cost = costate_backward(MODEL, p)
        for i in (0, len(cost.times) // 3, -1):
            b_i = costate_at(MODEL, p, float(cost.times[i]))
            assert np.max(np.abs(b_i - cost.b[i])) < 1e-12


class TestSwitchingFunction:
    def test_omega0_prefactor(self):
        rng = np.random.default_rng(8)
        model = QubitModel(omega0=2.5, x=(0.0, 1.0, 0.0), lambda_min=-1.0, lambda_max=1.0)
        a = rng.normal(size=(40, 3))
        b = rng.normal(size=(40, 3))
        g = switching_function(a, b, model)
        g_free = switching_function_scale_free(a, b, model)
        assert np.max(np.abs(g - 2.5 * g_free)) < 1e-14

    def test_matches_triple_product(self):
        a = np.array([0.3, -0.2, 0.8])
        b = np.array([0.0, 0.5, -0.1])
        expected = MODEL.omega0 * float(np.dot(np.cross(b, a), MODEL.x))
        assert switching_function(a, b, MODEL) == pytest.approx(expected, abs=1e-15)


class TestLevelSets:
    def test_transverse_axis_singular_at_zero(self):
        # x3 = 0 puts the singular level at 0, which is also lambda_min here
        assert singular_level(MODEL) == 0.0
        assert allowed_level_set(MODEL) == (0.0, 0.3)

    def test_singular_level_outside_bounds_dropped(self):
        m = QubitModel(omega0=1.0, x=(0.0, 0.0, 1.0), lambda_min=0.0, lambda_max=0.3)
        assert singular_level(m) is None
        assert allowed_level_set(m) == (0.0, 0.3)

    def test_singular_level_inside_bounds_kept(self):
        m = QubitModel(omega0=1.0, x=(0.0, 0.0, 1.0), lambda_min=0.0, lambda_max=0.6)
        assert singular_level(m) == pytest.approx(0.5, abs=1e-15)
        assert allowed_level_set(m) == (0.0, 0.5, 0.6)


class TestEnergyVerdicts:
    def test_bang_then_idle_consistent_before_window_closes(self):
        # drive to the orbit peak, then idle: fine as long as the idle is short
        p = BangBangProtocol(tau=4.0, switch_times=(T_STAR,), levels=(0.3, 0.0))
        report = pmp_check(MODEL, GROUND, p)
        assert report.verdict == "consistent"
        assert not report.violations
        assert min(abs(z - T_STAR) for z in report.zero_crossings) < 1e-3
        ok, _ = certify_protocol(MODEL, GROUND, p)
        assert ok

    def test_long_idle_breaks_sign_rule(self):
        # past t* + pi the precession pulls G1 negative while lambda sits at
        # lambda_min, so the same protocol stops being consistent
        p = BangBangProtocol(tau=8.0, switch_times=(T_STAR,), levels=(0.3, 0.0))
        report = pmp_check(MODEL, GROUND, p)
        assert report.verdict == "violated"
        window_close = T_STAR + math.pi
        assert all(v.t > window_close - 0.1 for v in report.violations)
        assert min(abs(z - window_close) for z in report.zero_crossings) < 1e-2
        ok, _ = certify_protocol(MODEL, GROUND, p)
        assert not ok

    def test_shifted_switch_is_flagged(self):
        p = BangBangProtocol(tau=4.0, switch_times=(T_STAR + 5e-3,), levels=(0.3, 0.0))
        report = pmp_check(MODEL, GROUND, p)
        assert report.verdict == "violated"
        assert any(v.kind == "unmatched-switch" for v in report.violations)

    def test_report_serialization(self):
        p = BangBangProtocol(tau=8.0, switch_times=(T_STAR,), levels=(0.3, 0.0))
        report = pmp_check(MODEL, GROUND, p)
        payload = json.loads(report.to_json())
        assert payload["verdict"] == "violated"
        assert payload["violations"][0].keys() >= {"t", "lambda", "g1", "kind"}


class TestSingularArcs:
    def test_idle_from_ground_is_energy_min_arc(self):
        # a and b pinned to opposite poles: G1 = 0 for the whole run, and the
        # battery is parked at its energy minimum
        p = BangBangProtocol(tau=6.0, switch_times=(), levels=(0.0,))
        report = pmp_check(MODEL, GROUND, p)
        assert report.verdict == "singular-arc-present"
        (t0, t1), = report.singular_intervals
        assert t0 == 0.0 and t1 == pytest.approx(6.0, abs=1e-12)

        ts = np.linspace(t0, t1, 24)
        a_arc = np.array([state_at(GROUND, MODEL, p, t) for t in ts])
        b_arc = np.array([costate_at(MODEL, p, t) for t in ts])
        klass = singular_classify(a_arc, b_arc, MODEL)
        assert klass.kind == "condition-2"
        assert klass.branch == "energy-min"

        ok, _ = certify_protocol(MODEL, GROUND, p)
        assert not ok

    def test_idle_at_full_charge_certifies(self):
        p = BangBangProtocol(tau=6.0, switch_times=(), levels=(0.0,))
        pole = np.array([0.0, 0.0, -1.0])
        ok, report = certify_protocol(MODEL, pole, p)
        assert report.verdict == "singular-arc-present"
        assert ok

        ts = np.linspace(0.0, 6.0, 24)
        a_arc = np.array([state_at(pole, MODEL, p, t) for t in ts])
        b_arc = np.array([costate_at(MODEL, p, t) for t in ts])
        klass = singular_classify(a_arc, b_arc, MODEL)
        assert klass.kind == "condition-2"
        assert klass.branch == "energy-max"


class TestMinTimeObjective:
    def test_unknown_objective_rejected(self):
        p = BangBangProtocol(tau=1.0, switch_times=(), levels=(0.3,))
        with pytest.raises(ValueError, match="objective"):
            pmp_check(MODEL, GROUND, p, objective="fastest")

    @pytest.mark.parametrize("tau", [0.3, 1.0, 2.0, 2.5])
    def test_short_bang_is_time_optimal(self, tau):
        # a single max-level pulse is the fastest route to its own endpoint
        # as long as it ends before the orbit peak
        p = BangBangProtocol(tau=tau, switch_times=(), levels=(0.3,))
        report = pmp_check(MODEL, GROUND, p, objective="min-time")
        assert report.verdict == "consistent"
        assert report.implied_scale is not None and report.implied_scale > 0

    def test_energy_and_min_time_share_sign_pattern(self):
        # on a rising pulse the solved terminal costate coincides with the
        # energy one, so the two switching functions agree up to 1/omega0
        p = BangBangProtocol(tau=2.0, switch_times=(), levels=(0.3,))
        assert pmp_check(MODEL, GROUND, p).verdict == "consistent"
        report = pmp_check(MODEL, GROUND, p, objective="min-time")
        assert report.verdict == "consistent"

        traj = evolve(GROUND, MODEL, p)
        g_energy = switching_function(traj.states, costate_backward(MODEL, p).b, MODEL)
        from qbcharge.pmp import _solve_min_time_costate
        b_tau = _solve_min_time_costate(MODEL, p, GROUND)
        g_time = switching_function_scale_free(
            traj.states, costate_backward(MODEL, p, b_tau=b_tau).b, MODEL)
        mask = np.abs(g_energy) > 1e-9
        ratios = g_time[mask] / g_energy[mask]
        assert np.all(ratios > 0)
        assert np.ptp(ratios) < 1e-9
