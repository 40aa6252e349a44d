"""Phonon-mediated gates in self-assembled dipolar crystals of polar molecules."""
from .params import BINDINGS, ModelParams, PhysicalBinding, to_dimensionless, to_physical, tweezer_constraints
from .crystal import lattice_with_marker, minimize_equilibrium, vdd, vdd_grad, vdd_hess
from .phonons import build_dynamical_matrix, classify_modes, normal_modes
from .coupling import (
    analytic_gate_estimates,
    displacement_bound,
    effective_spin_model,
    gate_metrics,
    optimize_detuning,
    polaron_oracle,
    spin_phonon_couplings,
)
from .rotor import stark_spectrum
from .dressed import LambdaDrive, dressed_dipole, mixing_angles

__all__ = [
    "BINDINGS", "ModelParams", "PhysicalBinding", "to_dimensionless", "to_physical", "tweezer_constraints",
    "lattice_with_marker", "minimize_equilibrium", "vdd", "vdd_grad", "vdd_hess",
    "build_dynamical_matrix", "classify_modes", "normal_modes",
    "analytic_gate_estimates", "displacement_bound", "effective_spin_model", "gate_metrics",
    "optimize_detuning", "polaron_oracle", "spin_phonon_couplings",
    "stark_spectrum", "LambdaDrive", "dressed_dipole", "mixing_angles",
]
