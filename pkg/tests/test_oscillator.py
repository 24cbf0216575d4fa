"""Oscillator moment propagation, costates, resonant square waves."""

import itertools
import math

import numpy as np
import pytest

from qbcharge.dynamics import BangBangProtocol
from qbcharge.oscillator import (VACUUM, OscillatorCostates, OscillatorMoments,
                                 SquareWaveSpec, costate_run, final_moments,
                                 frequency_scan, growth_exponent, moments_step,
                                 oscillator_energy, oscillator_run, run_to_csv,
                                 scan_to_csv, singular_check_osc,
                                 square_wave_energy, square_wave_protocol,
                                 switching_function_osc)

from oracles import costate_rk4_forward, oscillator_rk4_batch


class TestMomentsStep:
    def test_undriven_vacuum_is_fixed(self):
        v = moments_step(VACUUM, 0.0, 5.0, omega0=1.0)
        assert v.as_array().tolist() == [0.0, 0.0, 0.0]

    def test_constant_drive_closed_form(self):
        lam, w, t = 0.25, 1.7, 1.3
        v = moments_step(VACUUM, lam, t, omega0=w)
        assert v.v3 == pytest.approx(-(lam / w) * (1 - math.cos(w * t)), abs=1e-12)
        assert v.v2 == pytest.approx(-(lam / w) * math.sin(w * t), abs=1e-12)
        assert v.v1 == pytest.approx(2 * (lam / w) ** 2 * (1 - math.cos(w * t)), abs=1e-12)

    def test_constant_drive_peak_energy(self):
        # one half free period converts the displaced vacuum into 4 lam^2 / w
        v = moments_step(VACUUM, 0.3, math.pi, omega0=1.0)
        assert oscillator_energy(v, 1.0) == pytest.approx(0.36, abs=1e-12)

    def test_composition(self):
        rng = np.random.default_rng(20)
        v0 = OscillatorMoments(*rng.normal(size=3))
        lam, w = 0.4, 1.2
        one = moments_step(v0, lam, 1.7, w)
        two = moments_step(moments_step(v0, lam, 0.9, w), lam, 0.8, w)
        assert np.allclose(one.as_array(), two.as_array(), atol=1e-13)

    def test_against_rk4_batch(self):
        rng = np.random.default_rng(21)
        n = 30
        v0s = rng.normal(scale=0.8, size=(n, 3))
        v0s[:, 0] = np.abs(v0s[:, 0])  # occupation stays nonnegative
        lams = rng.uniform(-0.5, 0.5, size=n)
        durs = rng.uniform(0.1, 1.5, size=n)
        ref = oscillator_rk4_batch(v0s, lams, durs, omega0=1.0, max_dt=1e-4)
        for i in range(n):
            v = moments_step(OscillatorMoments(*v0s[i]), float(lams[i]),
                             float(durs[i]), omega0=1.0)
            assert np.max(np.abs(v.as_array() - ref[i])) < 1e-8


class TestRuns:
    def test_coherent_identity_from_vacuum(self):
        # driving the vacuum produces coherent states: v1 = v2^2 + v3^2
        p = BangBangProtocol(tau=9.0, switch_times=(2.0, 4.5, 7.0),
                             levels=(0.3, -0.2, 0.4, -0.3))
        _, vs = oscillator_run(p, omega0=1.0)
        gap = vs[:, 0] - (vs[:, 1] ** 2 + vs[:, 2] ** 2)
        assert np.max(np.abs(gap)) < 1e-12

    def test_grid_contains_switches(self):
        p = BangBangProtocol(tau=4.0, switch_times=(1.3,), levels=(0.2, -0.2))
        times, _ = oscillator_run(p, omega0=1.0)
        assert np.min(np.abs(times - 1.3)) == 0.0
        assert times[0] == 0.0 and times[-1] == 4.0

    def test_final_moments_matches_run(self):
        p = BangBangProtocol(tau=6.0, switch_times=(3.0,), levels=(0.3, -0.3))
        times, vs = oscillator_run(p, omega0=1.0)
        assert np.allclose(final_moments(p, 1.0).as_array(), vs[-1], atol=1e-12)


class TestCostates:
    def test_terminal_condition_and_p1(self):
        p = square_wave_protocol(SquareWaveSpec(omega_bar=1.0, lambda_max=0.3, tau=12.0))
        ps = costate_run(p, omega0=1.0)
        assert ps[-1].tolist() == [0.0, 0.0, 0.0]
        assert np.max(np.abs(ps[:, 0])) == 0.0

    def test_undriven_costate_vanishes(self):
        p = BangBangProtocol(tau=5.0, switch_times=(), levels=(0.0,))
        ps = costate_run(p, omega0=1.0)
        assert np.max(np.abs(ps)) == 0.0

    def test_backward_pass_inverts_forward_oracle(self):
        p = BangBangProtocol(tau=3.0, switch_times=(1.1, 2.0), levels=(0.3, -0.25, 0.15))
        ps = costate_run(p, omega0=1.3)
        pf = ps[0]
        for t0, t1, lev in p.segments():
            pf = costate_rk4_forward(pf, lev, t1 - t0, omega0=1.3, max_dt=1e-4)
        assert np.linalg.norm(pf) < 1e-8

    def test_terminal_switching_function_is_coherence_rate(self):
        spec = SquareWaveSpec(omega_bar=1.0, lambda_max=0.3, tau=20.0)
        p = square_wave_protocol(spec)
        times, vs = oscillator_run(p, omega0=1.0)
        ps = costate_run(p, omega0=1.0)
        g = switching_function_osc(vs, ps, 1.0)
        assert g[-1] == 2.0 * vs[-1, 1]


class TestSingularScan:
    def test_resonant_wave_has_no_singular_arc(self):
        p = square_wave_protocol(SquareWaveSpec(omega_bar=1.0, lambda_max=0.3, tau=20.0))
        times, vs = oscillator_run(p, omega0=1.0)
        ps = costate_run(p, omega0=1.0)
        report = singular_check_osc(times, vs, ps, 1.0)
        assert report.intervals == []
        assert not report.degenerate
        assert report.conclusion_ok

    def test_undriven_vacuum_is_degenerate(self):
        p = BangBangProtocol(tau=5.0, switch_times=(), levels=(0.0,))
        times, vs = oscillator_run(p, omega0=1.0)
        ps = costate_run(p, omega0=1.0)
        report = singular_check_osc(times, vs, ps, 1.0)
        assert report.degenerate
        assert report.intervals == [(0.0, 5.0)]
        assert report.conclusion_ok

    def test_sample_count_mismatch_rejected(self):
        with pytest.raises(ValueError, match="sample count"):
            singular_check_osc([0.0, 1.0], np.zeros((2, 3)), np.zeros((3, 3)), 1.0)


class TestSquareWave:
    def test_structure(self):
        spec = SquareWaveSpec(omega_bar=0.9, lambda_max=0.2, tau=11.0)
        p = square_wave_protocol(spec)
        half = math.pi / 0.9
        assert len(p.switch_times) == 3
        for n, t in enumerate(p.switch_times, start=1):
            assert t == pytest.approx(n * half, abs=1e-12)
        assert p.levels == (0.2, -0.2, 0.2, -0.2)

    def test_one_sided_variant(self):
        spec = SquareWaveSpec(omega_bar=1.0, lambda_max=0.2, tau=7.0)
        p = square_wave_protocol(spec, lambda_low=0.0)
        assert p.levels == (0.2, 0.0, 0.2)

    def test_sign_flip_invariance(self):
        # flipping the global drive sign maps v2, v3 -> -v2, -v3 and leaves v1
        spec = SquareWaveSpec(omega_bar=1.0, lambda_max=0.3, tau=15.0)
        up = square_wave_protocol(spec)
        down = BangBangProtocol(tau=up.tau, switch_times=up.switch_times,
                                levels=tuple(-l for l in up.levels))
        e_up = oscillator_energy(final_moments(up, 1.0), 1.0)
        e_down = oscillator_energy(final_moments(down, 1.0), 1.0)
        assert e_up == pytest.approx(e_down, rel=1e-14)

    def test_alternating_pattern_is_exhaustively_optimal(self):
        # all 2^12 sign patterns on twelve resonant half-periods: the
        # alternating wave (and its global mirror) maximizes the final energy
        half = math.pi
        n_seg = 12
        best = -1.0
        results = {}
        for signs in itertools.product((1.0, -1.0), repeat=n_seg):
            v = VACUUM
            for s in signs:
                v = moments_step(v, 0.3 * s, half, omega0=1.0)
            e = oscillator_energy(v, 1.0)
            results[signs] = e
            best = max(best, e)
        alt_up = tuple((-1.0) ** k for k in range(n_seg))
        alt_down = tuple(-s for s in alt_up)
        assert results[alt_up] == pytest.approx(best, abs=1e-12 * best)
        assert results[alt_down] == pytest.approx(results[alt_up], rel=1e-14)
        # and nothing else ties them
        near = [s for s, e in results.items() if e > best - 1e-9 * best]
        assert sorted(near) == sorted([alt_up, alt_down])

    def test_growth_exponent_is_two(self):
        slope = growth_exponent(1.0, 0.3, 1.0, n_low=10, n_high=100)
        assert slope == pytest.approx(2.0, abs=0.05)

    def test_off_resonance_grows_slower(self):
        spec_res = SquareWaveSpec(omega_bar=1.0, lambda_max=0.3, tau=40.0)
        spec_off = SquareWaveSpec(omega_bar=1.25, lambda_max=0.3, tau=40.0)
        assert square_wave_energy(spec_res, 1.0) > 5 * square_wave_energy(spec_off, 1.0)


class TestFrequencyScan:
    def test_resonance_wins(self):
        grid = [0.8, 0.9, 1.0, 1.1, 1.2]
        best, rows = frequency_scan(grid, 0.3, 40.0, 1.0)
        assert best == 1.0
        assert [wb for wb, _, _ in rows] == grid

    def test_csv_headers(self, tmp_path):
        best, rows = frequency_scan([0.9, 1.0, 1.1], 0.3, 10.0, 1.0)
        scan_path = tmp_path / "scan.csv"
        scan_to_csv(rows, scan_path)
        assert scan_path.read_text().splitlines()[0] == "omega_bar,tau,energy"

        p = square_wave_protocol(SquareWaveSpec(omega_bar=1.0, lambda_max=0.3, tau=10.0))
        times, vs = oscillator_run(p, omega0=1.0)
        ps = costate_run(p, omega0=1.0)
        run_path = tmp_path / "run.csv"
        run_to_csv(times, vs, p, 1.0, run_path, costates=ps)
        lines = run_path.read_text().splitlines()
        assert lines[0] == "t,v1,v2,v3,lambda,energy,g1"
        assert len(lines) == len(times) + 1
