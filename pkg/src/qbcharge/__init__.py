"""Bang-bang charging protocols for two-level and oscillator batteries.

Exact piecewise-constant propagation, energy-optimal protocol search,
Pontryagin-based certification of the found optima, charger-mediated
reductions, and work-content functionals, with a CLI that reproduces the
reference figures as CSV/JSON artifacts.
"""

from .dynamics import (
    GROUND,
    BangBangProtocol,
    QubitModel,
    Trajectory,
    check_bloch,
    energy,
    evolve,
    final_state,
    rotate,
    rotation_axis,
    state_at,
)
from .mcp import (
    EffectiveTwoLevelModel,
    QubitQubitModel,
    battery_energy,
    full_transfer_time,
    physical_protocol,
    reduce_oscillator_qubit,
    reduce_qubit_qubit,
    sqrt_n_equivalence_check,
)
from .optimize import (
    OptimizeSpec,
    StaircasePoint,
    min_time_to_target,
    optimize_energy,
    staircase_from_csv,
    staircase_scan,
    staircase_to_csv,
    unbounded_max_energy,
)
from .oscillator import (
    OscillatorCostates,
    OscillatorMoments,
    SquareWaveSpec,
    VACUUM,
    costate_run,
    frequency_scan,
    growth_exponent,
    oscillator_energy,
    oscillator_run,
    singular_check_osc,
    square_wave_energy,
    square_wave_protocol,
    switching_function_osc,
)
from .pmp import (
    PmpReport,
    Violation,
    allowed_level_set,
    certify_protocol,
    costate_at,
    costate_backward,
    pmp_check,
    singular_classify,
    singular_level,
    switching_function,
)
from .twofield import (
    RotatingFrameControl,
    TwoFieldModel,
    energy_m2,
    fig_comparison_table,
    lab_control,
    optimal_control_m2,
    reach_time,
    rotating_state,
    simulate_m2,
    verify_pmp_m2,
)
from .work import (
    SpectralPair,
    anti_ergotropy,
    entropy,
    entropy_matched_beta,
    ergotropy,
    free_energy_gap,
    max_unitary_energy,
    passive_energy,
    qubit_pair,
    total_ergotropy,
    work_report,
)

__version__ = "0.1.0"

__all__ = [
    "GROUND",
    "VACUUM",
    "BangBangProtocol",
    "EffectiveTwoLevelModel",
    "OptimizeSpec",
    "OscillatorCostates",
    "OscillatorMoments",
    "PmpReport",
    "QubitModel",
    "QubitQubitModel",
    "RotatingFrameControl",
    "SpectralPair",
    "SquareWaveSpec",
    "StaircasePoint",
    "Trajectory",
    "TwoFieldModel",
    "Violation",
    "allowed_level_set",
    "anti_ergotropy",
    "battery_energy",
    "certify_protocol",
    "check_bloch",
    "costate_at",
    "costate_backward",
    "costate_run",
    "energy",
    "energy_m2",
    "entropy",
    "entropy_matched_beta",
    "ergotropy",
    "evolve",
    "fig_comparison_table",
    "final_state",
    "free_energy_gap",
    "frequency_scan",
    "full_transfer_time",
    "growth_exponent",
    "lab_control",
    "max_unitary_energy",
    "min_time_to_target",
    "optimal_control_m2",
    "optimize_energy",
    "oscillator_energy",
    "oscillator_run",
    "passive_energy",
    "physical_protocol",
    "pmp_check",
    "qubit_pair",
    "reach_time",
    "reduce_oscillator_qubit",
    "reduce_qubit_qubit",
    "rotate",
    "rotating_state",
    "rotation_axis",
    "simulate_m2",
    "singular_check_osc",
    "singular_classify",
    "singular_level",
    "sqrt_n_equivalence_check",
    "square_wave_energy",
    "square_wave_protocol",
    "staircase_from_csv",
    "staircase_scan",
    "staircase_to_csv",
    "state_at",
    "switching_function",
    "switching_function_osc",
    "total_ergotropy",
    "unbounded_max_energy",
    "verify_pmp_m2",
    "work_report",
]
