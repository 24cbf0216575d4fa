"""Charger-mediated battery charging reduced to effective two-level problems.

A qubit or oscillator charger A coupled to a qubit battery B through a
tunable exchange interaction conserves the block structure of the joint
Hamiltonian, so the dynamics from the initial states of interest stays
inside one two-dimensional subspace.  Each block maps onto a single
effective qubit whose drive is the physical coupling (rescaled by
sqrt(n) for an oscillator charger holding n quanta), which the bang-bang
machinery for the direct problem consumes unchanged.

Basis convention inside a block: the effective ground state |g> is the
battery-empty component, |e> the battery-full one, so the excited
population p_e = (1 - a3)/2 maps back to battery energy omega_B * p_e.
The identity part of the block Hamiltonian is stored but never enters
the optimization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import BangBangProtocol, QubitModel, check_bloch
from .optimize import OptimizeSpec, StaircasePoint, min_time_to_target, optimize_energy

_INITIAL_KINDS = ("charged", "vacuum")


@dataclass(frozen=True)
class QubitQubitModel:
    """Qubit charger plus qubit battery with tunable exchange coupling.

    ``initial`` picks the dynamical block: "charged" starts from the
    charger holding the excitation (battery empty), "vacuum" from both
    qubits empty, where the counter-rotating part of the coupling connects
    to the doubly excited state.
    """

    omegaA: float
    omegaB: float
    lambda_min: float
    lambda_max: float
    initial: str = "charged"

    def __post_init__(self):
        if self.initial not in _INITIAL_KINDS:
            raise ValueError(f"initial must be one of {_INITIAL_KINDS}")
        if float(self.lambda_min) > float(self.lambda_max):
            raise ValueError("lambda_min exceeds lambda_max")
        object.__setattr__(self, "omegaA", float(self.omegaA))
        object.__setattr__(self, "omegaB", float(self.omegaB))
        object.__setattr__(self, "lambda_min", float(self.lambda_min))
        object.__setattr__(self, "lambda_max", float(self.lambda_max))


@dataclass(frozen=True)
class EffectiveTwoLevelModel:
    """Single-qubit image of one conserved two-dimensional block.

    splitting        sigma_z coefficient of the block Hamiltonian
    identity_offset  identity coefficient, irrelevant to the dynamics and
                     stripped from optimization
    lambda_scale     physical coupling -> effective drive multiplier
    omega_b          battery level spacing (maps populations to energy)
    objective_sign   +1 when maximizing the effective <H0'> also maximizes
                     the battery energy, -1 when it minimizes it
    lambda_min/max   physical coupling bounds carried along for convenience
    ground_label /   occupation labels of the block states, for report
    excited_label    readability ("10"/"01", "00"/"11", "n,0"/"n-1,1")
    """

    splitting: float
    identity_offset: float
    lambda_scale: float
    omega_b: float
    objective_sign: int
    lambda_min: float
    lambda_max: float
    ground_label: str
    excited_label: str
    charging_axis: tuple[float, float, float] = (1.0, 0.0, 0.0)

    @property
    def effective_omega0(self) -> float:
        # H0' = offset + splitting*sigma_z, while the direct problem writes
        # omega0*(1 - sigma_z)/2 whose sigma_z coefficient is -omega0/2
        return -2.0 * self.splitting

    def qubit_model(self, lambda_min: float | None = None,
                    lambda_max: float | None = None) -> QubitModel:
        """Effective single-qubit model with drive bounds folded by lambda_scale."""
        lo = float(self.lambda_min if lambda_min is None else lambda_min)
        hi = float(self.lambda_max if lambda_max is None else lambda_max)
        lo *= self.lambda_scale
        hi *= self.lambda_scale
        return QubitModel(omega0=self.effective_omega0, x=self.charging_axis,
                          lambda_min=min(lo, hi), lambda_max=max(lo, hi))

    def battery_energy(self, excited_population: float) -> float:
        return self.omega_b * float(excited_population)

    def block_energy(self, a) -> float:
        """Expectation of the block Hamiltonian, identity offset included."""
        a = check_bloch(a)
        return self.identity_offset + self.splitting * float(a[2])

    def block_populations(self, a) -> dict:
        """Both block-state populations keyed by their occupation labels."""
        a = check_bloch(a)
        p_e = (1.0 - float(a[2])) / 2.0
        return {self.ground_label: 1.0 - p_e, self.excited_label: p_e}

    def to_report_dict(self) -> dict:
        return {
            "splitting": self.splitting,
            "offset": self.identity_offset,
            "lambda_scale": self.lambda_scale,
            "objective_sign": self.objective_sign,
            "ground_label": self.ground_label,
            "excited_label": self.excited_label,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_report_dict(), sort_keys=True)


def _objective_sign(splitting: float) -> int:
    # max E_B means min a3; the block energy offset + splitting*a3 moves
    # the same way exactly when the splitting is negative
    if splitting < 0.0:
        return 1
    if splitting > 0.0:
        return -1
    return 1


def reduce_qubit_qubit(model: QubitQubitModel) -> EffectiveTwoLevelModel:
    """Block reduction of the two-qubit charging problem.

    charged block: {|10>, |01>} with energies {omegaA, omegaB} and the
    coupling acting as sigma_x.  vacuum block: {|00>, |11>} with energies
    {0, omegaA + omegaB}, reached through the counter-rotating part of the
    coupling, again acting as sigma_x within the block.
    """
    wa, wb = model.omegaA, model.omegaB
    if model.initial == "charged":
        splitting = (wa - wb) / 2.0
        return EffectiveTwoLevelModel(
            splitting=splitting,
            identity_offset=(wa + wb) / 2.0,
            lambda_scale=1.0,
            omega_b=wb,
            objective_sign=_objective_sign(splitting),
            lambda_min=model.lambda_min,
            lambda_max=model.lambda_max,
            ground_label="10",
            excited_label="01",
        )
    return EffectiveTwoLevelModel(
        splitting=-(wa + wb) / 2.0,
        identity_offset=(wa + wb) / 2.0,
        lambda_scale=1.0,
        omega_b=wb,
        objective_sign=1,
        lambda_min=model.lambda_min,
        lambda_max=model.lambda_max,
        ground_label="00",
        excited_label="11",
    )


def reduce_oscillator_qubit(omegaA: float, omegaB: float, n: int,
                            lambda_min: float = 0.0, lambda_max: float = 0.0
                            ) -> EffectiveTwoLevelModel:
    """Block reduction for an oscillator charger holding n quanta.

    The block {|n,0>, |n-1,1>} has energies {n*omegaA, (n-1)*omegaA+omegaB}
    and the coupling matrix element picks up the bosonic sqrt(n), which is
    folded into the effective drive bounds rather than the physical ones.
    """
    n = int(n)
    if n < 1:
        raise ValueError("the charger must hold at least one excitation")
    if float(lambda_min) > float(lambda_max):
        raise ValueError("lambda_min exceeds lambda_max")
    wa, wb = float(omegaA), float(omegaB)
    splitting = (wa - wb) / 2.0
    return EffectiveTwoLevelModel(
        splitting=splitting,
        identity_offset=((2 * n - 1) * wa + wb) / 2.0,
        lambda_scale=math.sqrt(n),
        omega_b=wb,
        objective_sign=_objective_sign(splitting),
        lambda_min=float(lambda_min),
        lambda_max=float(lambda_max),
        ground_label=f"{n},0",
        excited_label=f"{n - 1},1",
    )


def excited_population(a) -> float:
    a = check_bloch(a)
    return (1.0 - float(a[2])) / 2.0


def battery_energy(states, omegaB: float) -> np.ndarray:
    """Battery energy samples omega_B*(1 - a3)/2 along an effective trajectory."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    return omegaB * (1.0 - states[:, 2]) / 2.0


def battery_objective(effective: EffectiveTwoLevelModel):
    """Search objective returning battery energy; sign-safe for any splitting.

    The direct problem's energy objective flips meaning when the effective
    omega0 is negative (maximizing it would empty the battery), so charger
    problems always optimize the battery energy itself.
    """
    wb = effective.omega_b

    def obj(ax: float, ay: float, az: float) -> float:
        return wb * (1.0 - az) / 2.0

    return obj


def physical_protocol(effective: EffectiveTwoLevelModel,
                      protocol: BangBangProtocol) -> BangBangProtocol:
    """Map an effective-drive protocol back to physical coupling levels."""
    scale = effective.lambda_scale
    return BangBangProtocol(
        tau=protocol.tau,
        switch_times=protocol.switch_times,
        levels=tuple(lev / scale for lev in protocol.levels),
    )


def optimal_battery_point(effective: EffectiveTwoLevelModel, tau: float,
                          n_budget: int, *, a0=(0.0, 0.0, 1.0),
                          restarts: int = 32, seed: int = 0) -> StaircasePoint:
    """Best battery energy over bang-bang couplings at one horizon.

    Energies in the returned point are battery energies (omega_B units),
    not effective-model energies; the protocol is in effective drive units.
    """
    model = effective.qubit_model()
    spec = OptimizeSpec(model=model, a0=tuple(a0), tau=float(tau),
                        max_switches=int(n_budget), restarts=restarts, seed=seed)
    return optimize_energy(spec, objective=battery_objective(effective),
                           prefer_certified=False)


def full_transfer_time(effective: EffectiveTwoLevelModel, n_budget: int = 3, *,
                       tol_state: float = 1e-6, restarts: int = 8, seed: int = 0,
                       tau_cap: float = 60.0, resolution: float = 1e-5) -> float:
    """Shortest horizon moving the whole excitation into the battery."""
    model = effective.qubit_model()
    t, _ = min_time_to_target(model, (0.0, 0.0, 1.0), (0.0, 0.0, -1.0),
                              n_budget, tol_state=tol_state, restarts=restarts,
                              seed=seed, tau_cap=tau_cap, resolution=resolution)
    return t


def sqrt_n_equivalence_check(omegaA: float, omegaB: float, n: int,
                             lambda_min: float, lambda_max: float, tau: float, *,
                             n_budget: int = 5, restarts: int = 32,
                             seed: int = 0) -> dict:
    """Compare the oscillator charger against the rescaled qubit charger.

    The n-quanta oscillator block equals the qubit charged block with the
    coupling bound stretched by sqrt(n), so their optimal battery energies
    at any horizon must agree; both searches run with the same seed, which
    makes the effective protocols coincide switch for switch.
    """
    root = math.sqrt(n)
    osc_eff = reduce_oscillator_qubit(omegaA, omegaB, n, lambda_min, lambda_max)
    qq_eff = reduce_qubit_qubit(QubitQubitModel(
        omegaA=omegaA, omegaB=omegaB, lambda_min=root * lambda_min,
        lambda_max=root * lambda_max, initial="charged"))

    osc_pt = optimal_battery_point(osc_eff, tau, n_budget,
                                   restarts=restarts, seed=seed)
    qq_pt = optimal_battery_point(qq_eff, tau, n_budget,
                                  restarts=restarts, seed=seed)
    diff = abs(osc_pt.best_energy - qq_pt.best_energy)
    osc_phys = physical_protocol(osc_eff, osc_pt.best_protocol)
    return {
        "n": n,
        "tau": float(tau),
        "oscillator_best_energy": osc_pt.best_energy,
        "qubit_rescaled_best_energy": qq_pt.best_energy,
        "difference": diff,
        "oscillator_switch_times": list(osc_pt.best_protocol.switch_times),
        "qubit_switch_times": list(qq_pt.best_protocol.switch_times),
        "oscillator_physical_levels": list(osc_phys.levels),
        "reduction": osc_eff.to_report_dict(),
    }
