"""Entanglement-induced Mpemba effect for an emitter in a coupled-cavity waveguide."""
from .model import ModelParams, Hamiltonian, build_hamiltonian, dispersion, coupling_spectrum, fermi_golden_rule_rate
from .propagate import ExcitationState, Trajectory, evolve, evolve_batch, check_truncation, propagate_state
from .states import canonical_state, conjugate_state, time_reversed_state, dark_state, custom_state
from .observables import trace_distance, initial_slope, fit_decay_rate, detect_mpemba_crossing, estimate_delay

__version__ = "0.1.0"
