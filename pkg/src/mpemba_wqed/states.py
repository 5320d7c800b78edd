"""Initial-condition families and the Wannier/Bloch transform pair.

Transform convention: ``phi(k) = (2 pi)^(-1/2) sum_l q_l exp(i k l)`` and
``q_l = (2 pi)^(-1/2) int dk phi(k) exp(-i k l)``, on the grid
``k_i = -pi + 2 pi i / N_k`` with trapezoid weight ``2 pi / N_k``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import ModelParams, build_hamiltonian
from .propagate import (
    DEFAULT_TOL,
    ExcitationState,
    GuardViolationError,
    check_truncation,
    propagate_state,
)
from .symmetry import is_time_reversal_symmetric

__all__ = [
    "BlochField",
    "canonical_state",
    "conjugate_state",
    "time_reversed_state",
    "dark_state",
    "custom_state",
    "wannier_to_bloch",
    "bloch_to_wannier",
    "save_state",
    "load_state",
]


@dataclass(frozen=True, eq=False)
class BlochField:
    k_grid: np.ndarray
    amps: np.ndarray

    @property
    def weight(self) -> float:
        return 2.0 * math.pi / self.k_grid.size

    def norm_squared(self) -> float:
        return self.weight * float(np.sum(np.abs(self.amps) ** 2))


def canonical_state(params: ModelParams) -> ExcitationState:
    """Atom excited, field in vacuum."""
    return ExcitationState(1.0, np.zeros(params.n_sites, dtype=complex))


def conjugate_state(state: ExcitationState) -> ExcitationState:
    """Apply complex conjugation (the anti-unitary time reversal) to every amplitude."""
    return ExcitationState(state.atom_amp.conjugate(), state.field_amps.conj())


def time_reversed_state(params: ModelParams, t_f: float,
                        solver_tol: float = DEFAULT_TOL, override_guard: bool = False) -> ExcitationState:
    """Conjugate of the canonical state evolved forward for ``t_f``.

    Evolving the result for ``t_f`` returns the atom to its excited state.
    """
    if t_f < 0:
        raise ValueError("t_f must be >= 0")
    guard = check_truncation(params, t_f)
    if not guard.passed and not override_guard:
        raise GuardViolationError(
            f"M={params.M} too small for t_f={t_f:g}: need M >= {guard.required_M}"
        )
    start = canonical_state(params)
    if t_f == 0:
        return start
    h = build_hamiltonian(params)
    if not is_time_reversal_symmetric(h):
        raise ValueError("Hamiltonian is not real symmetric; time reversal is not complex conjugation")
    vec = propagate_state(start, h, t_f, tol=solver_tol)
    return ExcitationState.from_vector(vec.conj())


def dark_state(params: ModelParams, L: int) -> ExcitationState:
    """Quasi-dark atom-photon state with photons on even sites ``|l| <= 2L``.

    ``c_a`` is real positive, ``c_a^2 = 1 / (1 + (2L+1) J^2 / g0^2)``, and
    ``q_{2m} = (-1)^m Q0`` with ``Q0 = -c_a J / g0``.
    """
    if L < 0 or int(L) != L:
        raise ValueError(f"L must be a non-negative integer, got {L}")
    L = int(L)
    if params.g0 <= 0:
        raise ValueError("dark state requires g0 > 0")
    if 2 * L > params.M - 8:
        raise ValueError(f"L={L} too large for M={params.M}: need 2L <= M - 8")
    J, g0 = params.J, params.g0
    c_a = 1.0 / math.sqrt(1.0 + (2 * L + 1) * J ** 2 / g0 ** 2)
    q0 = -c_a * J / g0
    field = np.zeros(params.n_sites, dtype=complex)
    m = np.arange(-L, L + 1)
    field[2 * m + params.M] = q0 * (-1.0) ** np.abs(m)
    return ExcitationState(c_a, field)


def custom_state(atom_amp: complex, field_amps: Sequence[complex]) -> tuple[ExcitationState, float]:
    """Normalize arbitrary amplitudes; returns ``(state, scale)`` with ``state = scale * input``."""
    vec = np.concatenate([[complex(atom_amp)], np.asarray(field_amps, dtype=complex).ravel()])
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    scale = 1.0 / norm
    return ExcitationState.from_vector(vec * scale), scale


def _k_grid(n_k: int) -> np.ndarray:
    return -math.pi + 2.0 * math.pi * np.arange(n_k) / n_k


def wannier_to_bloch(state: ExcitationState | np.ndarray, n_k: int) -> BlochField:
    """Sample ``phi(k)`` on a uniform grid of ``n_k >= 2(2M+1)`` points."""
    q = state.field_amps if isinstance(state, ExcitationState) else np.asarray(state, dtype=complex)
    M = (q.size - 1) // 2
    if n_k < 2 * (2 * M + 1):
        raise ValueError(f"N_k={n_k} undersamples 2M+1={2 * M + 1} sites; need N_k >= {2 * (2 * M + 1)}")
    k = _k_grid(n_k)
    l = np.arange(-M, M + 1)
    amps = np.exp(1j * np.outer(k, l)) @ q / math.sqrt(2.0 * math.pi)
    return BlochField(k_grid=k, amps=amps)


def bloch_to_wannier(field: BlochField, M: int) -> np.ndarray:
    """Inverse transform by periodic trapezoid quadrature; returns ``q_l``, ``l = -M..M``."""
    l = np.arange(-M, M + 1)
    return field.weight * (np.exp(-1j * np.outer(l, field.k_grid)) @ field.amps) / math.sqrt(2.0 * math.pi)


def save_state(state: ExcitationState, path: str | Path) -> None:
    Path(path).write_text(json.dumps(state.to_dict(), indent=1) + "\n")


def load_state(path: str | Path) -> ExcitationState:
    return ExcitationState.from_dict(json.loads(Path(path).read_text()))
