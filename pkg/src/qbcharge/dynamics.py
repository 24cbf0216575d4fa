"""Exact Bloch-vector propagation for a driven two-level battery.

The battery Hamiltonian is H = omega0 * (1 - sigma_z) / 2 + lambda * (x . sigma),
with a unit charging axis ``x`` and a piecewise-constant drive amplitude
``lambda(t)``.  Writing the state as rho = (1 + a . sigma) / 2, a constant
drive level rotates the Bloch vector rigidly,

    da/dt = n ^ a,       n = 2 * (x1*lam, x2*lam, x3*lam - omega0/2),

so every segment of a bang-bang protocol is a single axis-angle rotation and
the propagation below is exact up to floating-point roundoff.  Energies are
measured in units of omega0 and times in 1/omega0 throughout.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

#: Bloch vector of the empty (ground-state) battery.
GROUND = (0.0, 0.0, 1.0)

#: Default number of samples per protocol segment in exported trajectories.
DEFAULT_SAMPLES = 64

# slack tolerated on |a| <= 1 and on control levels vs. the model bounds
_NORM_SLACK = 1e-12
_LEVEL_SLACK = 1e-9


def check_bloch(a) -> np.ndarray:
    """Validate and return a Bloch vector as a float array of shape (3,)."""
    arr = np.asarray(a, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"Bloch vector must be a 3-vector, got shape {arr.shape}")
    norm = float(np.linalg.norm(arr))
    if norm > 1.0 + _NORM_SLACK:
        raise ValueError(f"Bloch vector norm {norm:.15g} exceeds 1")
    return arr


def energy(a, omega0: float) -> float:
    """Battery energy omega0 * (1 - a3) / 2 of a Bloch vector."""
    return float(omega0) * (1.0 - float(np.asarray(a, dtype=float)[2])) / 2.0


@dataclass(frozen=True)
class QubitModel:
    """Two-level battery with one bounded drive channel.

    omega0      level splitting (rad / time); may be zero for resonant
                effective models produced by charger reductions
    x           unit charging axis multiplying the drive
    lambda_min  lower drive bound
    lambda_max  upper drive bound
    """

    omega0: float
    x: tuple[float, float, float]
    lambda_min: float
    lambda_max: float

    def __post_init__(self):
        x = tuple(float(c) for c in self.x)
        if len(x) != 3:
            raise ValueError("charging axis must be a 3-vector")
        norm = math.sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"charging axis must be unit length, |x| = {norm:.12g}")
        if float(self.lambda_min) > float(self.lambda_max):
            raise ValueError("lambda_min exceeds lambda_max")
        object.__setattr__(self, "omega0", float(self.omega0))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "lambda_min", float(self.lambda_min))
        object.__setattr__(self, "lambda_max", float(self.lambda_max))

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.lambda_min, self.lambda_max)

    def energy(self, a) -> float:
        return energy(a, self.omega0)


def rotation_axis(model: QubitModel, lam: float) -> np.ndarray:
    """Instantaneous rotation axis n(lam) of the Bloch dynamics."""
    x1, x2, x3 = model.x
    lam = float(lam)
    return np.array([
        2.0 * x1 * lam,
        2.0 * x2 * lam,
        2.0 * (x3 * lam - model.omega0 / 2.0),
    ])


def rotate(a, n, dt: float) -> np.ndarray:
    """Advance a Bloch vector by time dt under a constant axis n (da/dt = n ^ a)."""
    a = np.asarray(a, dtype=float)
    n = np.asarray(n, dtype=float)
    w = float(np.linalg.norm(n))
    if w == 0.0 or dt == 0.0:
        return a.copy()
    u = n / w
    th = w * float(dt)
    c = math.cos(th)
    s = math.sin(th)
    return a * c + np.cross(u, a) * s + u * (np.dot(u, a) * (1.0 - c))


def _rotate_many(a, n, dts) -> np.ndarray:
    # vectorized variant of rotate() over an array of time offsets
    a = np.asarray(a, dtype=float)
    dts = np.asarray(dts, dtype=float)
    w = float(np.linalg.norm(n))
    if w == 0.0:
        return np.broadcast_to(a, (dts.size, 3)).copy()
    u = np.asarray(n, dtype=float) / w
    th = w * dts
    c = np.cos(th)[:, None]
    s = np.sin(th)[:, None]
    return a * c + np.cross(u, a) * s + u * (np.dot(u, a)) * (1.0 - c)


@dataclass(frozen=True)
class BangBangProtocol:
    """Piecewise-constant drive on [0, tau] with right-open segments.

    ``levels[k]`` applies on [t_{k-1}, t_k), where the switch times are
    strictly increasing and strictly inside (0, tau).  ``levels`` has one
    more entry than ``switch_times``; the last level applies up to and
    including t = tau.
    """

    tau: float
    switch_times: tuple[float, ...]
    levels: tuple[float, ...]

    def __post_init__(self):
        tau = float(self.tau)
        ts = tuple(float(t) for t in self.switch_times)
        lv = tuple(float(l) for l in self.levels)
        if tau < 0.0:
            raise ValueError("tau must be nonnegative")
        if len(lv) != len(ts) + 1:
            raise ValueError("levels must have exactly one more entry than switch_times")
        for k, t in enumerate(ts):
            if not (0.0 < t < tau):
                raise ValueError(f"switch time {t!r} outside (0, {tau})")
            if k > 0 and t <= ts[k - 1]:
                raise ValueError("switch times must be strictly increasing")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "switch_times", ts)
        object.__setattr__(self, "levels", lv)

    @property
    def n_switches(self) -> int:
        return len(self.switch_times)

    def level_at(self, t: float) -> float:
        """Drive level at time t (right-open convention)."""
        if not (0.0 <= t <= self.tau):
            raise ValueError(f"t = {t!r} outside [0, {self.tau}]")
        return self.levels[bisect_right(self.switch_times, t)]

    def segments(self):
        """Yield (t_start, t_end, level) triples covering [0, tau]."""
        bounds = (0.0, *self.switch_times, self.tau)
        for k, lev in enumerate(self.levels):
            yield bounds[k], bounds[k + 1], lev

    def validate_against(self, model: QubitModel) -> None:
        lo = model.lambda_min - _LEVEL_SLACK
        hi = model.lambda_max + _LEVEL_SLACK
        for lev in self.levels:
            if not (lo <= lev <= hi):
                raise ValueError(
                    f"level {lev!r} outside model bounds [{model.lambda_min}, {model.lambda_max}]"
                )


@dataclass
class Trajectory:
    """Sampled Bloch trajectory with per-sample battery energy."""

    times: np.ndarray
    states: np.ndarray
    energies: np.ndarray

    def to_csv(self, path) -> None:
        """Write the trajectory as CSV with header t,a1,a2,a3,energy."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "a1", "a2", "a3", "energy"])
            for t, a, e in zip(self.times, self.states, self.energies):
                writer.writerow([
                    format(t, ".12g"),
                    format(a[0], ".12g"),
                    format(a[1], ".12g"),
                    format(a[2], ".12g"),
                    format(e, ".12g"),
                ])


def evolve(a0, model: QubitModel, protocol: BangBangProtocol,
           samples_per_segment: int = DEFAULT_SAMPLES) -> Trajectory:
    """Propagate a Bloch vector through a protocol, sampling every segment.

    Switch times always appear in the returned grid.  Propagation applies
    one exact axis-angle rotation per segment, so accuracy is independent
    of samples_per_segment.
    """
    if samples_per_segment < 1:
        raise ValueError("samples_per_segment must be >= 1")
    a = check_bloch(a0)
    protocol.validate_against(model)

    times = [np.array([0.0])]
    states = [a[None, :]]
    for t0, t1, lev in protocol.segments():
        if t1 <= t0:
            continue
        local = np.linspace(t0, t1, samples_per_segment + 1)
        n = rotation_axis(model, lev)
        seg_states = _rotate_many(a, n, local - t0)
        a = seg_states[-1]
        times.append(local[1:])
        states.append(seg_states[1:])
    t_arr = np.concatenate(times)
    s_arr = np.concatenate(states, axis=0)
    e_arr = model.omega0 * (1.0 - s_arr[:, 2]) / 2.0
    return Trajectory(times=t_arr, states=s_arr, energies=e_arr)


def final_state(a0, model: QubitModel, protocol: BangBangProtocol) -> np.ndarray:
    """State at t = tau; same exact propagation as evolve() without sampling."""
    a = check_bloch(a0)
    protocol.validate_against(model)
    for t0, t1, lev in protocol.segments():
        if t1 > t0:
            a = rotate(a, rotation_axis(model, lev), t1 - t0)
    return a


def state_at(a0, model: QubitModel, protocol: BangBangProtocol, t: float) -> np.ndarray:
    """Exact state at an arbitrary time 0 <= t <= tau."""
    if not (0.0 <= t <= protocol.tau):
        raise ValueError(f"t = {t!r} outside [0, {protocol.tau}]")
    a = check_bloch(a0)
    for t0, t1, lev in protocol.segments():
        if t <= t0:
            break
        end = min(t, t1)
        if end > t0:
            a = rotate(a, rotation_axis(model, lev), end - t0)
        if t <= t1:
            break
    return a
