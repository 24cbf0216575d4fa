"""Two-channel qubit charging with a joint intensity bound.

Controls lambda1, lambda2 couple through sigma_x and sigma_y with
lambda1^2 + lambda2^2 <= r_max^2.  In the frame co-rotating with the
splitting the drive becomes a constant vector of length r_max, so the
optimal protocol is analytic: rotate the Bloch vector about a fixed
horizontal axis k at angular speed 2*r_max until it reaches the energy
pole (a "pi pulse" completing the polar angle), then switch off.  In the
lab frame the optimal control is a circularly rotating field at the
splitting frequency.

Conventions: the rotating frame is a_tilde(t) = R_z(+omega0 t) a(t), so
the lab control is lambda(t) = r_max*(cos(theta0 - omega0 t),
sin(theta0 - omega0 t)) during the drive and zero afterwards.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import GROUND, Trajectory, check_bloch, energy
from .pmp import PmpReport, Violation

_AXIS_FALLBACK = (1.0, 0.0, 0.0)  # k convention when a0 is on the z axis


@dataclass(frozen=True)
class TwoFieldModel:
    """Qubit with two transverse drive channels under a joint bound."""

    omega0: float
    r_max: float

    def __post_init__(self):
        if float(self.r_max) <= 0.0:
            raise ValueError("r_max must be positive")
        object.__setattr__(self, "omega0", float(self.omega0))
        object.__setattr__(self, "r_max", float(self.r_max))


@dataclass(frozen=True)
class RotatingFrameControl:
    """The analytic optimal control in rotating-frame parameters.

    theta0          azimuth of the rotation axis k = (cos, sin, 0)
    alpha0          initial polar angle of the Bloch vector
    drive_duration  min(tau, tau1); the drive runs on [0, drive_duration)
    tau             total horizon; [drive_duration, tau] idles at zero drive
    """

    theta0: float
    alpha0: float
    drive_duration: float
    tau: float

    def __post_init__(self):
        if self.drive_duration < 0.0 or self.drive_duration > self.tau + 1e-12:
            raise ValueError("drive_duration must lie in [0, tau]")

    def k_axis(self) -> np.ndarray:
        return np.array([math.cos(self.theta0), math.sin(self.theta0), 0.0])


def polar_angle(a0) -> float:
    """Angle between the Bloch vector and the +z axis; 0 for the zero vector."""
    a = check_bloch(a0)
    r = float(np.linalg.norm(a))
    if r < 1e-15:
        return 0.0
    return math.acos(max(-1.0, min(1.0, a[2] / r)))


def reach_time(model: TwoFieldModel, a0) -> float:
    """tau1 = (pi - alpha0) / (2 r_max): time to rotate a0 onto the energy pole."""
    return (math.pi - polar_angle(a0)) / (2.0 * model.r_max)


def optimal_control_m2(model: TwoFieldModel, a0, tau: float) -> RotatingFrameControl:
    """Constant maximal rotating-frame drive about k until the pole, then idle."""
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    a = check_bloch(a0)
    perp = math.hypot(a[0], a[1])
    if perp < 1e-15:
        kx, ky = _AXIS_FALLBACK[0], _AXIS_FALLBACK[1]
    else:
        # k = normalize(z ^ a0), orthogonal to both z and a0
        kx, ky = -a[1] / perp, a[0] / perp
    theta0 = math.atan2(ky, kx)
    alpha0 = polar_angle(a)
    tau1 = (math.pi - alpha0) / (2.0 * model.r_max)
    return RotatingFrameControl(theta0=theta0, alpha0=alpha0,
                                drive_duration=min(float(tau), tau1), tau=float(tau))


def energy_m2(model: TwoFieldModel, a0, tau: float) -> float:
    """Closed-form optimal energy omega0*(1 - |a0| cos(2 r_max tau + alpha0))/2.

    Grows until the polar angle reaches pi at tau1 and stays at the
    unitary ceiling omega0*(1+|a0|)/2 afterwards.
    """
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    a = check_bloch(a0)
    r = float(np.linalg.norm(a))
    alpha0 = polar_angle(a)
    tau1 = (math.pi - alpha0) / (2.0 * model.r_max)
    if tau >= tau1:
        return model.omega0 * (1.0 + r) / 2.0
    return model.omega0 * (1.0 - r * math.cos(2.0 * model.r_max * tau + alpha0)) / 2.0


def rotating_state(model: TwoFieldModel, a0, control: RotatingFrameControl,
                   t: float) -> np.ndarray:
    """Closed-form rotating-frame trajectory under the optimal control."""
    a = check_bloch(a0)
    td = min(float(t), control.drive_duration)
    k = control.k_axis()
    ka = np.cross(k, a)
    ang = 2.0 * model.r_max * td
    # k is orthogonal to a0 by construction, so the Rodrigues term along k drops
    return a * math.cos(ang) + ka * math.sin(ang)


def lab_control(model: TwoFieldModel, control: RotatingFrameControl,
                t: float) -> tuple[float, float]:
    """(lambda1, lambda2) at time t in the lab frame."""
    if t < control.drive_duration:
        ph = control.theta0 - model.omega0 * t
        return model.r_max * math.cos(ph), model.r_max * math.sin(ph)
    return 0.0, 0.0


def _rotate(a, n, dt):
    w = math.sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2])
    if w * dt == 0.0:
        return a
    u = n / w
    th = w * dt
    return (a * math.cos(th) + np.cross(u, a) * math.sin(th)
            + u * float(np.dot(u, a)) * (1.0 - math.cos(th)))


def simulate_m2(model: TwoFieldModel, a0, control: RotatingFrameControl,
                dt: float = 1e-4) -> Trajectory:
    """Lab-frame numeric propagation of the rotating control.

    The continuously rotating field is discretized piecewise-constantly at
    the step midpoint, which keeps the accumulated error O(dt^2 * tau) and
    leaves the analytic rotating-frame solution as the authority it is
    cross-checked against.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    a = check_bloch(a0)
    tau = control.tau
    times = [0.0]
    states = [a.copy()]
    # stepping each phase on its own grid keeps the drive/idle boundary exact
    for lo, hi in ((0.0, control.drive_duration), (control.drive_duration, tau)):
        span = hi - lo
        if span <= 0.0:
            continue
        n_steps = max(1, int(math.ceil(span / dt)))
        step = span / n_steps
        t = lo
        for _ in range(n_steps):
            l1, l2 = lab_control(model, control, t + 0.5 * step)
            n = np.array([2.0 * l1, 2.0 * l2, -model.omega0])
            a = _rotate(a, n, step)
            t += step
            times.append(t)
            states.append(a.copy())
    times_arr = np.array(times)
    states_arr = np.array(states)
    energies = np.array([energy(s, model.omega0) for s in states_arr])
    return Trajectory(times=times_arr, states=states_arr, energies=energies)


def to_rotating_frame(model: TwoFieldModel, times, states) -> np.ndarray:
    """Apply R_z(+omega0 t) sample-wise."""
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    c = np.cos(model.omega0 * times)
    s = np.sin(model.omega0 * times)
    out = np.empty_like(states)
    out[:, 0] = c * states[:, 0] - s * states[:, 1]
    out[:, 1] = s * states[:, 0] + c * states[:, 1]
    out[:, 2] = states[:, 2]
    return out


def rotating_costate(model: TwoFieldModel, control: RotatingFrameControl,
                     t: float) -> np.ndarray:
    """Rotating-frame costate with terminal direction (0,0,-1).

    Constant over the trailing idle (zero drive generates no rotating-frame
    precession), and rotated backward about k through the drive.
    """
    b_end = np.array([0.0, 0.0, -1.0])
    td = control.drive_duration
    if t >= td:
        return b_end
    k = control.k_axis()
    ang = 2.0 * model.r_max * (float(t) - td)  # negative: backward along the drive
    return (b_end * math.cos(ang) + np.cross(k, b_end) * math.sin(ang)
            + k * float(np.dot(k, b_end)) * (1.0 - math.cos(ang)))


def verify_pmp_m2(model: TwoFieldModel, a0, control: RotatingFrameControl, *,
                  n_samples: int = 256, n_competitors: int = 1000, seed: int = 0,
                  tol_const: float = 1e-9, tol_angle: float = 1e-6,
                  tol_slack: float = 1e-10) -> PmpReport:
    """Check the stationarity structure of the analytic two-field optimum.

    During the drive the vector c = b ^ a (rotating frame) must be constant
    and anti-parallel to the rotation axis k; the drive then minimizes the
    control pairing lambda . c over the disk |lambda| <= r_max, which is
    verified against randomly sampled competitor controls.  Once the state
    reaches the pole, c vanishes and the remainder of the run is singular.
    """
    a0 = check_bloch(a0)
    td = control.drive_duration
    tau = control.tau
    k = control.k_axis()
    violations: list[Violation] = []
    singular: list[tuple[float, float]] = []

    r0 = float(np.linalg.norm(a0))
    c_ref_mag = r0 * math.sin(2.0 * model.r_max * td + control.alpha0)

    cross_samples = []
    if td > 0.0:
        ts = np.linspace(0.0, td, n_samples)
        for t in ts:
            a = rotating_state(model, a0, control, t)
            b = rotating_costate(model, control, t)
            cross_samples.append((float(t), np.cross(b, a)))
        mags = np.array([np.linalg.norm(c) for _, c in cross_samples])
        spread = float(np.max(mags) - np.min(mags)) if len(mags) else 0.0
        drift = max(
            float(np.max(np.linalg.norm(
                np.array([c for _, c in cross_samples])
                - cross_samples[0][1], axis=1))) if cross_samples else 0.0,
            spread)
        if drift > tol_const:
            violations.append(Violation(
                t=float(ts[int(np.argmax(mags))]), level=model.r_max, g1=drift,
                kind="drive-cross-drift",
                expected=f"|c(t) - c(0)| <= {tol_const:g}"))
        if abs(c_ref_mag) > tol_const:
            # anti-parallel to k: angle between c and -k below tol_angle
            for t, c in cross_samples[:: max(1, n_samples // 32)]:
                cn = np.linalg.norm(c)
                if cn < 1e-15:
                    continue
                cosang = float(np.dot(c, -k)) / cn
                ang = math.acos(max(-1.0, min(1.0, cosang)))
                if ang > tol_angle:
                    violations.append(Violation(
                        t=t, level=model.r_max, g1=ang,
                        kind="axis-alignment",
                        expected=f"angle(c, -k) <= {tol_angle:g} rad"))
                    break

        rng = np.random.default_rng(seed)
        lam_star = model.r_max * k[:2]
        worst = math.inf
        worst_t = 0.0
        for _ in range(n_competitors):
            t = float(rng.uniform(0.0, td))
            # uniform over the disk of radius r_max
            r = model.r_max * math.sqrt(float(rng.uniform()))
            ph = float(rng.uniform(0.0, 2.0 * math.pi))
            lam = np.array([r * math.cos(ph), r * math.sin(ph)])
            a = rotating_state(model, a0, control, t)
            b = rotating_costate(model, control, t)
            c = np.cross(b, a)[:2]
            slack = float(np.dot(lam - lam_star, c))
            if slack < worst:
                worst, worst_t = slack, t
        if worst < -tol_slack:
            violations.append(Violation(
                t=worst_t, level=model.r_max, g1=worst,
                kind="competitor-slack",
                expected=f"(lambda - lambda*) . c >= -{tol_slack:g}"))

    if td < tau:
        if abs(c_ref_mag) <= max(tol_const, 1e-12):
            # pole reached: c vanishes after switch-off, and during the drive
            # as well since |c| there equals its end-of-drive value
            singular.append((0.0, tau))
        else:
            violations.append(Violation(
                t=td, level=0.0, g1=abs(c_ref_mag),
                kind="early-switch-off",
                expected="drive may stop only once c vanishes (pole reached)"))

    if violations:
        verdict = "violated"
    elif singular:
        verdict = "singular-arc-present"
    else:
        verdict = "consistent"
    return PmpReport(verdict=verdict, violations=violations,
                     zero_crossings=[], singular_intervals=singular)


def fig_comparison_table(model: TwoFieldModel, tau_grid, a0=GROUND, *,
                         n_budget: int = 5, restarts: int = 32,
                         seed: int = 0) -> list[tuple[float, float, float, float]]:
    """Rows (tau, E_m2, E_m1_pos, E_m1_sym) comparing drive families.

    E_m2 is the closed form; the single-channel columns run the bang-bang
    search with positive-only bounds [0, r_max] and symmetric bounds
    [-r_max, r_max].
    """
    from .dynamics import QubitModel
    from .optimize import staircase_scan

    pos = QubitModel(omega0=model.omega0, x=(1.0, 0.0, 0.0),
                     lambda_min=0.0, lambda_max=model.r_max)
    sym = QubitModel(omega0=model.omega0, x=(1.0, 0.0, 0.0),
                     lambda_min=-model.r_max, lambda_max=model.r_max)
    tau_grid = [float(t) for t in tau_grid]
    pos_pts = staircase_scan(pos, a0, tau_grid, [n_budget], restarts=restarts,
                             seed=seed)
    sym_pts = staircase_scan(sym, a0, tau_grid, [n_budget], restarts=restarts,
                             seed=seed + 1)
    rows = []
    for tau, ppt, spt in zip(tau_grid, pos_pts, sym_pts):
        rows.append((tau, energy_m2(model, a0, tau), ppt.best_energy,
                     spt.best_energy))
    return rows


def comparison_to_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "E_m2", "E_m1_pos", "E_m1_sym"])
        for tau, e2, e1p, e1s in rows:
            writer.writerow([format(tau, ".12g"), format(e2, ".12g"),
                             format(e1p, ".12g"), format(e1s, ".12g")])
