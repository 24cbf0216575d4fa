"""Pontryagin necessary-condition checks for qubit bang-bang protocols.

For the energy-maximization problem the costate can be written as
pi(t) = -omega0 * (1 + b(t) . sigma) / 2 with b(tau) = (0, 0, -1); b obeys
the same rigid rotation as the Bloch vector, so it propagates exactly.
The switching function is

    G1(t) = omega0 * x . (b(t) ^ a(t)),

and pointwise minimization of the control Hamiltonian requires
lambda = lambda_min where G1 > 0, lambda = lambda_max where G1 < 0, and an
interior (singular) level only where G1 = 0.  ``pmp_check`` samples a
protocol against those rules, locates the zero crossings of G1, collects
singular intervals, and returns a machine-readable report.

For the minimum-time problem to a fixed target the costate scale is free.
``pmp_check`` with objective="min-time" solves the switch-time zero
conditions for an admissible terminal costate direction (least-squares
nullspace), checks the terminal pairing condition only up to a positive
factor, and reports the implied scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    BangBangProtocol,
    QubitModel,
    check_bloch,
    rotate,
    rotation_axis,
    state_at,
    _rotate_many,
)

TERMINAL_COSTATE = (0.0, 0.0, -1.0)


@dataclass(frozen=True)
class CostateBloch:
    """Costate in Bloch form pi = scale * (trace_part + b . sigma) / 2."""

    b: tuple[float, float, float]
    scale: float
    trace_part: float = 1.0


@dataclass
class CostateTrajectory:
    """Sampled costate vector b(t); same grid convention as dynamics.evolve."""

    times: np.ndarray
    b: np.ndarray
    scale: float
    trace_part: float = 1.0


@dataclass
class Violation:
    t: float
    level: float
    g1: float
    kind: str
    expected: str

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "lambda": self.level,
            "g1": self.g1,
            "kind": self.kind,
            "expected": self.expected,
        }


@dataclass
class PmpReport:
    verdict: str
    violations: list[Violation] = field(default_factory=list)
    zero_crossings: list[float] = field(default_factory=list)
    singular_intervals: list[tuple[float, float]] = field(default_factory=list)
    implied_scale: float | None = None

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "violations": [v.to_dict() for v in self.violations],
            "zero_crossings": list(self.zero_crossings),
            "singular_intervals": [[t0, t1] for t0, t1 in self.singular_intervals],
        }
        if self.implied_scale is not None:
            out["implied_scale"] = self.implied_scale
        return out

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kwargs)


@dataclass
class SingularClassification:
    """Outcome of singular_classify: kind and, for condition-2, the branch."""

    kind: str            # "condition-1", "condition-2", or "none"
    branch: str | None   # "energy-max" / "energy-min" for condition-2


def singular_level(model: QubitModel) -> float | None:
    """Interior drive level omega0*x3/2 compatible with a singular arc.

    Returns None when the level falls outside [lambda_min, lambda_max].
    """
    lam = model.omega0 * model.x[2] / 2.0
    tol = 1e-12 * max(1.0, abs(model.lambda_min), abs(model.lambda_max))
    if model.lambda_min - tol <= lam <= model.lambda_max + tol:
        return lam
    return None


def allowed_level_set(model: QubitModel) -> tuple[float, ...]:
    """Candidate bang levels: both bounds plus the singular level when admissible."""
    levels = [model.lambda_min, model.lambda_max]
    sing = singular_level(model)
    if sing is not None:
        levels.append(min(max(sing, model.lambda_min), model.lambda_max))
    levels = sorted(set(levels))
    out = [levels[0]]
    tol = 1e-12 * max(1.0, abs(model.lambda_min), abs(model.lambda_max))
    for lev in levels[1:]:
        if lev - out[-1] > tol:
            out.append(lev)
    return tuple(out)


def switching_function(a, b, model: QubitModel):
    """Energy-problem switching function omega0 * x . (b ^ a).

    Accepts single vectors or (n, 3) arrays; broadcasts elementwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(model.x)
    return model.omega0 * np.dot(np.cross(b, a), x)

def switching_function_scale_free(a, b, model: QubitModel):
    """Minimum-time variant x . (b ^ a); same zeros and signs for omega0 > 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(model.x)
    return np.dot(np.cross(b, a), x)


def _costate_boundaries(model: QubitModel, protocol: BangBangProtocol, b_tau) -> list[np.ndarray]:
    """Costate vector at every segment boundary, index-aligned with (0, t1, ..., tau)."""
    segs = list(protocol.segments())
    b = check_bloch(b_tau) if np.linalg.norm(b_tau) <= 1 + 1e-12 else np.asarray(b_tau, float)
    out = [np.asarray(b, dtype=float)]
    for t0, t1, lev in reversed(segs):
        if t1 > t0:
            b = rotate(b, rotation_axis(model, lev), -(t1 - t0))
        out.append(b)
    out.reverse()
    return out


def costate_backward(model: QubitModel, protocol: BangBangProtocol,
                     samples_per_segment: int = 64, b_tau=TERMINAL_COSTATE) -> CostateTrajectory:
    """Costate trajectory b(t) integrated backward from b(tau).

    The grid matches dynamics.evolve with the same samples_per_segment, so
    state and costate samples can be combined index-by-index.
    """
    if samples_per_segment < 1:
        raise ValueError("samples_per_segment must be >= 1")
    bounds_b = _costate_boundaries(model, protocol, b_tau)
    times = [np.array([0.0])]
    bs = [bounds_b[0][None, :]]
    for k, (t0, t1, lev) in enumerate(protocol.segments()):
        if t1 <= t0:
            continue
        local = np.linspace(t0, t1, samples_per_segment + 1)
        n = rotation_axis(model, lev)
        seg = _rotate_many(bounds_b[k], n, local - t0)
        times.append(local[1:])
        bs.append(seg[1:])
    b_all = np.concatenate(bs, axis=0)
    # the roundtrip rotate-back / rotate-forward leaves ~1e-16 dust on the
    # terminal sample; pin it to the exact boundary value
    b_all[-1] = bounds_b[-1]
    return CostateTrajectory(
        times=np.concatenate(times),
        b=b_all,
        scale=-model.omega0,
    )


def costate_at(model: QubitModel, protocol: BangBangProtocol, t: float,
               b_tau=TERMINAL_COSTATE) -> np.ndarray:
    """Exact costate vector at an arbitrary time 0 <= t <= tau."""
    if not (0.0 <= t <= protocol.tau):
        raise ValueError(f"t = {t!r} outside [0, {protocol.tau}]")
    bounds_b = _costate_boundaries(model, protocol, b_tau)
    for k, (t0, t1, lev) in enumerate(protocol.segments()):
        if t <= t1 or k == len(protocol.levels) - 1:
            if t > t0:
                return rotate(bounds_b[k], rotation_axis(model, lev), min(t, t1) - t0)
            return bounds_b[k].copy()
    return bounds_b[-1].copy()


def singular_classify(a_traj, b_traj, model: QubitModel,
                      tol: float = 1e-6) -> SingularClassification:
    """Classify a sampled singular arc.

    condition-2: a and b stay parallel.  Parallel vectors co-rotate, so the
    alignment holds over the whole run and pins the terminal state to an
    energy extremum; which one is read off the sign of a.b (conserved, and
    equal to -a3(tau) scaled since b(tau) points along -z): a.b > 0 means
    the terminal state is the energy maximum.
    condition-1: the charging axis stays orthogonal to a ^ b, which forces
    the drive to the singular level omega0*x3/2.
    """
    a = np.atleast_2d(np.asarray(a_traj, dtype=float))
    b = np.atleast_2d(np.asarray(b_traj, dtype=float))
    if a.shape != b.shape:
        raise ValueError("state and costate sample arrays must have matching shapes")
    cross = np.cross(a, b)
    cross_mag = np.linalg.norm(cross, axis=1)
    scale = max(1e-30, float(np.max(np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))))
    if float(np.max(cross_mag)) <= tol * scale:
        mean_dot = float(np.mean(np.sum(a * b, axis=1)))
        branch = None
        if mean_dot > tol * scale:
            branch = "energy-max"
        elif mean_dot < -tol * scale:
            branch = "energy-min"
        return SingularClassification(kind="condition-2", branch=branch)
    x = np.asarray(model.x)
    if float(np.max(np.abs(np.dot(cross, x)))) <= tol * scale:
        return SingularClassification(kind="condition-1", branch=None)
    return SingularClassification(kind="none", branch=None)


def _solve_min_time_costate(model: QubitModel, protocol: BangBangProtocol, a0) -> np.ndarray:
    """Terminal costate direction consistent with G1(t_k) = 0 at every switch.

    Each switch imposes one linear condition on b(tau); the direction is the
    preferred unit vector of the constraint nullspace, oriented to make the
    terminal pairing factor positive when possible.
    """
    rows = []
    for t_k in protocol.switch_times:
        a_k = state_at(a0, model, protocol, t_k)
        # backward rotation of b(tau) to t_k is linear; express the condition
        # x . (b(t_k) ^ a(t_k)) = 0 as row . b(tau) = 0
        c_k = np.cross(a_k, np.asarray(model.x))
        # map c_k forward: row = R(t_k -> tau)^T c_k, built by rotating c_k
        # through the remaining segments
        v = c_k.copy()
        for t0, t1, lev in protocol.segments():
            if t1 <= t_k:
                continue
            start = max(t0, t_k)
            if t1 > start:
                v = rotate(v, rotation_axis(model, lev), t1 - start)
        rows.append(v)

    a_end = state_at(a0, model, protocol, protocol.tau)
    m_end = rotation_axis(model, protocol.levels[-1]) / 2.0
    pref = np.cross(m_end, a_end)  # direction maximizing the pairing factor
    dual = np.asarray(TERMINAL_COSTATE, dtype=float)  # energy-objective direction

    if not rows:
        # no switch conditions: prefer the energy-dual direction, it reproduces
        # the energy sign pattern whenever the run is optimal for both problems
        if abs(np.dot(dual, pref)) > 1e-12:
            return dual if np.dot(dual, pref) > 0 else -dual
        if np.linalg.norm(pref) < 1e-15:
            return dual
        return pref / np.linalg.norm(pref)

    mat = np.asarray(rows)
    _, svals, vt = np.linalg.svd(mat, full_matrices=True)
    rank = int(np.sum(svals > 1e-9 * max(1.0, svals[0] if svals.size else 1.0)))
    null = vt[rank:].T  # (3, 3-rank)
    if null.shape[1] == 0:
        # over-constrained: fall back to the least-violating direction
        b = vt[-1]
    else:
        proj = null @ (null.T @ dual)
        if np.linalg.norm(proj) <= 1e-12 or abs(np.dot(proj, pref)) <= 1e-12:
            proj = null @ (null.T @ pref)
        b = proj if np.linalg.norm(proj) > 1e-12 else null[:, 0]
    nb = np.linalg.norm(b)
    b = b / nb if nb > 0 else np.asarray(TERMINAL_COSTATE, dtype=float)
    if np.dot(b, pref) < 0:
        b = -b
    return b


def pmp_check(model: QubitModel, a0, protocol: BangBangProtocol,
              tol_zero: float | None = None, tol_time: float | None = None, *,
              samples_per_segment: int = 64, min_arc: float | None = None,
              objective: str = "energy") -> PmpReport:
    """Check a protocol against the pointwise minimization rules.

    Flags a violation when lambda sits at lambda_min while G1 < -tol_zero,
    at lambda_max while G1 > +tol_zero, or strictly interior while
    |G1| > tol_zero.  Samples within tol_time of a switch or of a located
    zero crossing are exempt, switch times must lie within tol_time of a
    zero crossing (or inside a singular interval), and stretches with
    |G1| <= tol_zero longer than min_arc are reported as singular intervals.
    """
    if objective not in ("energy", "min-time"):
        raise ValueError(f"unknown objective {objective!r}")
    w_scale = abs(model.omega0) if abs(model.omega0) > 0 else 1.0
    if tol_zero is None:
        tol_zero = 1e-8 * w_scale
    if tol_time is None:
        tol_time = 1e-3 / w_scale
    if min_arc is None:
        min_arc = 1e-3 * protocol.tau

    a0 = check_bloch(a0)
    protocol.validate_against(model)

    if objective == "energy":
        b_tau = np.asarray(TERMINAL_COSTATE, dtype=float)
        g_scale_omega = True
    else:
        b_tau = _solve_min_time_costate(model, protocol, a0)
        g_scale_omega = False

    # shared sample grid for state and costate
    from .dynamics import evolve  # local import keeps module load cheap

    traj = evolve(a0, model, protocol, samples_per_segment=samples_per_segment)
    cost = costate_backward(model, protocol, samples_per_segment=samples_per_segment,
                            b_tau=b_tau)
    times = traj.times
    if g_scale_omega:
        g = switching_function(traj.states, cost.b, model)
    else:
        g = switching_function_scale_free(traj.states, cost.b, model)

    def g_at(t: float) -> float:
        a_t = state_at(a0, model, protocol, t)
        b_t = costate_at(model, protocol, t, b_tau=b_tau)
        if g_scale_omega:
            return float(switching_function(a_t, b_t, model))
        return float(switching_function_scale_free(a_t, b_t, model))

    # --- zero crossings, refined by bisection -------------------------------
    refine_tol = min(1e-6 / w_scale, tol_time)
    zeros: list[float] = []
    for i in range(len(times) - 1):
        gi, gj = g[i], g[i + 1]
        if gi == 0.0 and abs(gj) > tol_zero:
            zeros.append(float(times[i]))
            continue
        if gi * gj < 0.0:
            lo, hi = float(times[i]), float(times[i + 1])
            glo = float(gi)
            while hi - lo > refine_tol:
                mid = 0.5 * (lo + hi)
                gm = g_at(mid)
                if gm == 0.0:
                    lo = hi = mid
                    break
                if glo * gm < 0.0:
                    hi = mid
                else:
                    lo, glo = mid, gm
            zeros.append(0.5 * (lo + hi))

    # --- singular intervals --------------------------------------------------
    singular: list[tuple[float, float]] = []
    below = np.abs(g) <= tol_zero
    i = 0
    while i < len(times):
        if below[i]:
            j = i
            while j + 1 < len(times) and below[j + 1]:
                j += 1
            t0, t1 = float(times[i]), float(times[j])
            if t1 - t0 >= min_arc and j > i:
                singular.append((t0, t1))
            i = j + 1
        else:
            i += 1

    def in_singular(t: float, pad: float) -> bool:
        return any(t0 - pad <= t <= t1 + pad for t0, t1 in singular)

    violations: list[Violation] = []

    # --- switch times must sit on zeros of G1 -------------------------------
    for t_k in protocol.switch_times:
        dist = min((abs(t_k - z) for z in zeros), default=math.inf)
        if dist <= tol_time or in_singular(t_k, tol_time) or abs(g_at(t_k)) <= tol_zero:
            continue
        violations.append(Violation(
            t=float(t_k), level=float(protocol.level_at(t_k)), g1=g_at(t_k),
            kind="unmatched-switch", expected="switch at a zero of G1",
        ))

    # --- pointwise sign rules ------------------------------------------------
    lev_tol = 1e-12 * max(1.0, abs(model.lambda_min), abs(model.lambda_max))
    degenerate_bounds = (model.lambda_max - model.lambda_min) <= lev_tol
    if not degenerate_bounds:
        switch_arr = np.asarray(protocol.switch_times)
        zero_arr = np.asarray(zeros)
        for i, t in enumerate(times):
            gi = float(g[i])
            if abs(gi) <= tol_zero:
                continue
            if in_singular(float(t), tol_time):
                continue
            if switch_arr.size and float(np.min(np.abs(switch_arr - t))) <= tol_time:
                continue
            if zero_arr.size and float(np.min(np.abs(zero_arr - t))) <= tol_time:
                continue
            lev = protocol.level_at(float(t)) if t < protocol.tau else protocol.levels[-1]
            is_min = abs(lev - model.lambda_min) <= lev_tol
            is_max = abs(lev - model.lambda_max) <= lev_tol
            if is_min and gi < -tol_zero:
                violations.append(Violation(
                    t=float(t), level=lev, g1=gi, kind="sign-rule",
                    expected="lambda_min requires G1 >= 0",
                ))
            elif is_max and gi > tol_zero:
                violations.append(Violation(
                    t=float(t), level=lev, g1=gi, kind="sign-rule",
                    expected="lambda_max requires G1 <= 0",
                ))
            elif not is_min and not is_max:
                violations.append(Violation(
                    t=float(t), level=lev, g1=gi, kind="sign-rule",
                    expected="interior level requires G1 = 0",
                ))

    implied_scale = None
    if objective == "min-time":
        a_end = state_at(a0, model, protocol, protocol.tau)
        m_end = rotation_axis(model, protocol.levels[-1]) / 2.0
        pairing = float(np.dot(b_tau, np.cross(m_end, a_end)))
        if pairing > 1e-12:
            implied_scale = 1.0 / pairing
        else:
            violations.append(Violation(
                t=float(protocol.tau), level=float(protocol.levels[-1]), g1=pairing,
                kind="terminal-pairing",
                expected="terminal pairing factor must be positive",
            ))

    if violations:
        verdict = "violated"
    elif singular:
        verdict = "singular-arc-present"
    else:
        verdict = "consistent"
    return PmpReport(
        verdict=verdict,
        violations=violations,
        zero_crossings=zeros,
        singular_intervals=singular,
        implied_scale=implied_scale,
    )


def certify_protocol(model: QubitModel, a0, protocol: BangBangProtocol, *,
                     tol_zero: float | None = None, tol_time: float | None = None,
                     samples_per_segment: int = 64) -> tuple[bool, PmpReport]:
    """True when a protocol is consistent or singular only in benign ways.

    Benign singular arcs are condition-2 arcs parked at the energy maximum
    (a fully charged battery idling) and condition-1 arcs driven at the
    singular level.
    """
    report = pmp_check(model, a0, protocol, tol_zero=tol_zero, tol_time=tol_time,
                       samples_per_segment=samples_per_segment)
    if report.verdict == "consistent":
        return True, report
    if report.verdict != "singular-arc-present":
        return False, report
    sing = singular_level(model)
    for t0, t1 in report.singular_intervals:
        ts = np.linspace(t0, t1, 24)
        a_arc = np.array([state_at(a0, model, protocol, t) for t in ts])
        b_arc = np.array([costate_at(model, protocol, t) for t in ts])
        klass = singular_classify(a_arc, b_arc, model)
        if klass.kind == "condition-2" and klass.branch == "energy-max":
            continue
        if klass.kind == "condition-1" and sing is not None:
            mid_lev = protocol.level_at(min(0.5 * (t0 + t1), protocol.tau))
            if abs(mid_lev - sing) <= 1e-9 * max(1.0, abs(sing)):
                continue
        return False, report
    return True, report
