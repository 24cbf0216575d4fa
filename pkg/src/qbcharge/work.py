"""Work-content functionals for finite-dimensional diagonalizable states.

All operations take a spectral pair (state populations, Hamiltonian
levels) plus the caller-supplied mean energy, never a density matrix:
every consumer here already owns diagonal data or Bloch forms, and the
spectra are all these functionals depend on.

Conventions: eta-down means populations sorted descending, eps-up means
levels sorted ascending.  The passive energy pairs eta-down with eps-up
(largest weight on the lowest level); the maximal unitary energy pairs
eta-up with eps-up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SUM_TOL = 1e-12
_NEG_TOL = -1e-14


@dataclass(frozen=True)
class SpectralPair:
    """State populations and Hamiltonian levels in matched index order."""

    rho_eigs: tuple[float, ...]
    h_eigs: tuple[float, ...]

    def __post_init__(self):
        eta = tuple(float(x) for x in self.rho_eigs)
        eps = tuple(float(x) for x in self.h_eigs)
        if len(eta) != len(eps):
            raise ValueError("population and level lists differ in length")
        if not eta:
            raise ValueError("spectra are empty")
        if min(eta) < _NEG_TOL:
            raise ValueError(f"negative population {min(eta)!r}")
        if abs(sum(eta) - 1.0) > _SUM_TOL:
            raise ValueError(f"populations sum to {sum(eta)!r}, not 1")
        object.__setattr__(self, "rho_eigs", eta)
        object.__setattr__(self, "h_eigs", eps)

    @property
    def dimension(self) -> int:
        return len(self.rho_eigs)


def qubit_pair(a, omega0: float) -> tuple[SpectralPair, float]:
    """Spectral pair and mean energy of a qubit Bloch state.

    The state spectrum is (1 +- |a|)/2 against levels (0, omega0); the
    mean energy is omega0 (1 - a3) / 2.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (3,):
        raise ValueError("Bloch vector must be a 3-vector")
    r = float(np.linalg.norm(a))
    if r > 1.0 + 1e-9:
        raise ValueError("Bloch vector leaves the unit ball")
    r = min(r, 1.0)
    sp = SpectralPair(rho_eigs=((1.0 + r) / 2.0, (1.0 - r) / 2.0),
                      h_eigs=(0.0, float(omega0)))
    return sp, float(omega0) * (1.0 - float(a[2])) / 2.0


def passive_energy(sp: SpectralPair) -> float:
    """Minimal mean energy on the unitary orbit: sum of eta-down * eps-up."""
    eta = sorted(sp.rho_eigs, reverse=True)
    eps = sorted(sp.h_eigs)
    return math.fsum(h * e for h, e in zip(eta, eps))


def max_unitary_energy(sp: SpectralPair) -> float:
    """Maximal mean energy on the unitary orbit: sum of eta-up * eps-up."""
    eta = sorted(sp.rho_eigs)
    eps = sorted(sp.h_eigs)
    return math.fsum(h * e for h, e in zip(eta, eps))


def ergotropy(sp: SpectralPair, mean_energy: float) -> float:
    """Maximal work extractable by one unitary: mean minus passive energy."""
    return float(mean_energy) - passive_energy(sp)


def anti_ergotropy(sp: SpectralPair, mean_energy: float) -> float:
    """Minimal (most negative) unitary work: mean minus the orbit maximum."""
    return float(mean_energy) - max_unitary_energy(sp)


def entropy(probs) -> float:
    """Shannon entropy in nats with the 0 log 0 = 0 convention."""
    s = 0.0
    for p in probs:
        p = float(p)
        if p > 0.0:
            s -= p * math.log(p)
    return s


def gibbs_energy_entropy(h_eigs, beta: float) -> tuple[float, float]:
    """Mean energy and entropy of the Gibbs state at inverse temperature beta.

    Overflow-safe for either sign of beta via a spectral shift; beta may be
    +inf (ground state) or -inf (top state), both with their degenerate
    -manifold entropy.
    """
    eps = np.asarray(h_eigs, dtype=float)
    if math.isinf(beta):
        pick = eps.min() if beta > 0 else eps.max()
        mult = int(np.sum(np.isclose(eps, pick, rtol=0.0, atol=1e-15)))
        return float(pick), math.log(mult)
    shift = eps.min() if beta >= 0.0 else eps.max()
    w = np.exp(-beta * (eps - shift))
    z = float(np.sum(w))
    e = float(np.sum(eps * w) / z)
    s = math.log(z) + beta * (e - shift)
    return e, s


def entropy_matched_beta(sp: SpectralPair, tol: float = 1e-10) -> float:
    """Inverse temperature whose Gibbs state has the state's entropy.

    The Gibbs entropy peaks at beta = 0 (log d) and falls monotonically on
    each side, so the match is searched on the beta >= 0 branch first (the
    lower-energy solution) and on beta < 0 only when the positive branch
    cannot reach the target, which happens for entropies below the
    ground-manifold degeneracy plateau.  Returns +inf for (numerically)
    pure states.  A negative result marks a regime the equilibrium form
    does not cover and is worth flagging downstream.
    """
    eps = np.asarray(sp.h_eigs, dtype=float)
    target = entropy(sp.rho_eigs)
    if target <= tol:
        return math.inf
    if target >= math.log(sp.dimension):
        # at most rounding dust above the maximum: only beta = 0 qualifies.
        # Targets merely NEAR log d must still go through the bisection;
        # entropy is quadratic around beta = 0, so snapping them to zero
        # would leave an energy error of order sqrt(entropy gap).
        return 0.0
    if float(eps.max() - eps.min()) <= 1e-300:
        # all levels equal: Gibbs state is uniform at every beta
        return 0.0

    def bisect(lo: float, hi: float) -> float:
        # lo is always the high-entropy (near-zero) end.  The bracket is
        # shrunk to machine width rather than stopping at the entropy
        # tolerance: the Gibbs energy error scales like (entropy error)/beta
        # and would otherwise blow up for nearly uniform states.
        for _ in range(200):
            if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo), abs(hi)):
                break
            mid = 0.5 * (lo + hi)
            _, s = gibbs_energy_entropy(eps, mid)
            if s > target:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    _, s_floor = gibbs_energy_entropy(eps, math.inf)
    if target >= s_floor - tol:
        hi = 1.0
        for _ in range(4000):
            _, s = gibbs_energy_entropy(eps, hi)
            if s <= target:
                break
            hi *= 2.0
        return bisect(0.0, hi)

    _, s_ceil = gibbs_energy_entropy(eps, -math.inf)
    if target < s_ceil - tol:
        # entropy below both degeneracy plateaus: no finite match exists,
        # the ground projection is the limiting reference
        return math.inf
    lo = -1.0
    for _ in range(4000):
        _, s = gibbs_energy_entropy(eps, lo)
        if s <= target:
            break
        lo *= 2.0
    return bisect(0.0, lo)


def total_ergotropy(sp: SpectralPair, mean_energy: float,
                    bisection_tol: float = 1e-10) -> float:
    """Work extractable in the many-copy limit: mean minus the energy of
    the entropy-matched Gibbs state."""
    beta = entropy_matched_beta(sp, tol=bisection_tol)
    e_ref, _ = gibbs_energy_entropy(sp.h_eigs, beta)
    return float(mean_energy) - e_ref


def free_energy_gap(sp: SpectralPair, mean_energy: float,
                    beta_bar: float) -> float:
    """Non-equilibrium free energy mean - S/beta_bar at a reference beta."""
    if not beta_bar > 0.0:
        raise ValueError("beta_bar must be positive")
    return float(mean_energy) - entropy(sp.rho_eigs) / float(beta_bar)


def work_report(sp: SpectralPair, mean_energy: float, *,
                beta_bar: float | None = None,
                bisection_tol: float = 1e-10) -> dict:
    """All functionals at once, for the CLI and notebook use."""
    beta = entropy_matched_beta(sp, tol=bisection_tol)
    e_ref, s_ref = gibbs_energy_entropy(sp.h_eigs, beta)
    out = {
        "mean_energy": float(mean_energy),
        "passive_energy": passive_energy(sp),
        "max_unitary_energy": max_unitary_energy(sp),
        "ergotropy": ergotropy(sp, mean_energy),
        "anti_ergotropy": anti_ergotropy(sp, mean_energy),
        "total_ergotropy": float(mean_energy) - e_ref,
        "entropy": entropy(sp.rho_eigs),
        "entropy_matched_beta": beta if math.isfinite(beta) else None,
        "entropy_matched_beta_negative": bool(beta < 0.0),
    }
    if beta_bar is not None:
        out["free_energy_gap"] = free_energy_gap(sp, mean_energy, beta_bar)
    return out
