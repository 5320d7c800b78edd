"""Executable checks of time-reversal symmetry in the one-excitation sector."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .model import Hamiltonian, ModelParams, build_hamiltonian
from .propagate import DEFAULT_TOL, GuardViolationError, check_truncation, propagate_state

__all__ = ["is_time_reversal_symmetric", "reversal_roundtrip_check"]


def is_time_reversal_symmetric(h, tol: float = 1e-12) -> bool:
    """True iff ``h`` commutes with complex conjugation, i.e. is real and symmetric."""
    mat = h.matrix if isinstance(h, Hamiltonian) else h
    mat = sp.csr_matrix(mat)
    if mat.nnz and np.max(np.abs(np.imag(mat.data))) > tol:
        return False
    asym = (mat - mat.T).tocsr()
    return not (asym.nnz and np.max(np.abs(asym.data)) > tol)


def reversal_roundtrip_check(params: ModelParams, t_f: float, tol: float = DEFAULT_TOL,
                             hamiltonian: Hamiltonian | None = None) -> float:
    """Distance between ``K U K U psi0`` and ``psi0`` for the canonical ``psi0``.

    ``U = exp(-i H t_f)`` and ``K`` is complex conjugation. Any real symmetric
    ``H`` gives zero up to solver error; ``hamiltonian`` lets callers inject a
    symmetry-breaking variant.
    """
    h = hamiltonian if hamiltonian is not None else build_hamiltonian(params)
    guard = check_truncation(h.params, 2 * t_f)
    if not guard.passed:
        raise GuardViolationError(
            f"M={h.params.M} too small for round trip of 2*t_f={2 * t_f:g}: need M >= {guard.required_M}"
        )
    psi0 = np.zeros(h.dim, dtype=complex)
    psi0[0] = 1.0
    if t_f == 0:
        return 0.0
    forward = propagate_state(psi0, h, t_f, tol)
    back = propagate_state(forward.conj(), h, t_f, tol).conj()
    return float(np.linalg.norm(back - psi0))
