"""Core Bloch propagation against the matrix-exponential oracle."""

import math

import numpy as np
import pytest

from qbcharge.dynamics import (GROUND, BangBangProtocol, QubitModel, energy,
                               evolve, final_state, rotate, rotation_axis,
                               state_at)

from oracles import bloch_expm_protocol, bloch_expm_step

MODEL = QubitModel(omega0=1.0, x=(1.0, 0.0, 0.0), lambda_min=0.0, lambda_max=0.3)


def random_protocol(rng, tau, bounds=(0.0, 0.3), max_switches=4):
    n = int(rng.integers(0, max_switches + 1))
    ts = tuple(np.sort(rng.uniform(tau * 0.02, tau * 0.98, size=n)))
    levels = tuple(rng.uniform(*bounds, size=n + 1))
    return BangBangProtocol(tau=tau, switch_times=ts, levels=levels)


def random_bloch(rng, pure=False):
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    if not pure:
        v *= rng.uniform(0.1, 1.0)
    return v


class TestEnergy:
    def test_ground_is_empty(self):
        assert energy((0, 0, 1), 1.0) == 0.0

    def test_inverted_is_full(self):
        assert energy((0, 0, -1), 1.0) == 1.0

    def test_equatorial_is_half(self):
        assert energy((1, 0, 0), 1.0) == 0.5

    def test_scales_with_omega0(self):
        assert energy((0, 0, -1), 2.5) == 2.5


class TestModelValidation:
    def test_axis_must_be_unit(self):
        with pytest.raises(ValueError, match="unit length"):
            QubitModel(omega0=1.0, x=(1.0, 1.0, 0.0), lambda_min=0.0, lambda_max=1.0)

    def test_bounds_ordering(self):
        with pytest.raises(ValueError, match="lambda_min"):
            QubitModel(omega0=1.0, x=(1.0, 0.0, 0.0), lambda_min=0.5, lambda_max=0.1)

    def test_zero_omega0_allowed(self):
        m = QubitModel(omega0=0.0, x=(1.0, 0.0, 0.0), lambda_min=0.0, lambda_max=1.0)
        assert m.omega0 == 0.0


class TestProtocolValidation:
    def test_switch_outside_horizon(self):
        with pytest.raises(ValueError, match="outside"):
            BangBangProtocol(tau=1.0, switch_times=(1.5,), levels=(0.0, 0.3))

    def test_switches_must_increase(self):
        with pytest.raises(ValueError, match="increasing"):
            BangBangProtocol(tau=1.0, switch_times=(0.6, 0.4), levels=(0.0, 0.3, 0.0))

    def test_level_count(self):
        with pytest.raises(ValueError, match="one more"):
            BangBangProtocol(tau=1.0, switch_times=(0.5,), levels=(0.3,))

    def test_zero_horizon_constant_protocol(self):
        p = BangBangProtocol(tau=0.0, switch_times=(), levels=(0.3,))
        assert p.tau == 0.0

    def test_level_at_right_open(self):
        p = BangBangProtocol(tau=2.0, switch_times=(1.0,), levels=(0.1, 0.2))
        assert p.level_at(1.0 - 1e-12) == 0.1
        assert p.level_at(1.0) == 0.2  # switch instant takes the new level
        assert p.level_at(2.0) == 0.2

    def test_validate_against_bounds(self):
        p = BangBangProtocol(tau=1.0, switch_times=(), levels=(0.4,))
        with pytest.raises(ValueError, match="outside model bounds"):
            p.validate_against(MODEL)


class TestRotateOracle:
    def test_matches_matrix_exponential_on_100_cases(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(100):
            a = random_bloch(rng)
            omega0 = rng.uniform(0.5, 2.0)
            x = random_bloch(rng, pure=True)
            lam = rng.uniform(-0.5, 0.5)
            dt = rng.uniform(0.0, 5.0)
            m = QubitModel(omega0=omega0, x=tuple(x), lambda_min=-1.0, lambda_max=1.0)
            got = rotate(a, rotation_axis(m, lam), dt)
            ref = bloch_expm_step(a, omega0, x, lam, dt)
            worst = max(worst, float(np.max(np.abs(got - ref))))
        assert worst < 1e-10

    def test_fixed_single_segment_tau15(self):
        # constant lambda = lambda_max over the full Fig. 3 horizon
        p = BangBangProtocol(tau=15.0, switch_times=(), levels=(0.3,))
        got = final_state(GROUND, MODEL, p)
        ref = bloch_expm_protocol(np.array(GROUND), 1.0, (1.0, 0.0, 0.0), p)
        assert np.max(np.abs(got - ref)) < 1e-10

    def test_zero_axis_is_identity(self):
        # x = z with lam = omega0/2 cancels the drift entirely
        m = QubitModel(omega0=1.0, x=(0.0, 0.0, 1.0), lambda_min=0.0, lambda_max=1.0)
        assert np.linalg.norm(rotation_axis(m, 0.5)) == 0.0
        a = np.array([0.3, -0.2, 0.4])
        p = BangBangProtocol(tau=3.0, switch_times=(), levels=(0.5,))
        assert np.array_equal(final_state(a, m, p), a)


class TestTrajectoryInvariants:
    def test_norm_preserved(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a0 = random_bloch(rng)
            p = random_protocol(rng, tau=float(rng.uniform(0.5, 12.0)))
            traj = evolve(a0, MODEL, p)
            norms = np.linalg.norm(traj.states, axis=1)
            assert np.max(np.abs(norms - norms[0])) < 1e-10

    def test_composition_split(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            a0 = random_bloch(rng)
            tau = float(rng.uniform(1.0, 10.0))
            p = random_protocol(rng, tau)
            s = float(rng.uniform(0.1, 0.9)) * tau
            whole = final_state(a0, MODEL, p)
            first = state_at(a0, MODEL, p, s)
            # resume from s: clip the protocol to [s, tau]
            ts = tuple(t - s for t in p.switch_times if t > s)
            lv = (p.level_at(s),) + tuple(
                l for t, l in zip(p.switch_times, p.levels[1:]) if t > s)
            tail = BangBangProtocol(tau=tau - s, switch_times=ts, levels=lv)
            resumed = final_state(first, MODEL, tail)
            assert np.max(np.abs(resumed - whole)) < 1e-12

    def test_switch_times_on_grid(self):
        p = BangBangProtocol(tau=5.0, switch_times=(1.234, 3.456), levels=(0.3, 0.0, 0.2))
        traj = evolve(GROUND, MODEL, p, samples_per_segment=7)
        for t in p.switch_times:
            assert np.min(np.abs(traj.times - t)) < 1e-14

    def test_state_at_matches_grid(self):
        rng = np.random.default_rng(9)
        p = random_protocol(rng, 6.0)
        traj = evolve(GROUND, MODEL, p, samples_per_segment=16)
        for idx in rng.integers(0, len(traj.times), size=10):
            a = state_at(GROUND, MODEL, p, float(traj.times[idx]))
            assert np.max(np.abs(a - traj.states[idx])) < 1e-12

    def test_energy_samples_match_definition(self):
        p = BangBangProtocol(tau=4.0, switch_times=(2.0,), levels=(0.3, 0.0))
        traj = evolve(GROUND, MODEL, p)
        ref = MODEL.omega0 * (1.0 - traj.states[:, 2]) / 2.0
        assert np.array_equal(traj.energies, ref)


class TestCsvExport:
    def test_header_and_precision(self, tmp_path):
        p = BangBangProtocol(tau=1.0, switch_times=(), levels=(0.3,))
        path = tmp_path / "traj.csv"
        evolve(GROUND, MODEL, p, samples_per_segment=2).to_csv(path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "t,a1,a2,a3,energy"
        assert len(lines) == 4  # header + 3 samples
        val = lines[1].split(",")[0]
        assert float(val) == 0.0
