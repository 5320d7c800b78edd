"""Coupled-cavity waveguide with a single two-level emitter.

The one-excitation Hamiltonian is written in the frame rotating at the atomic
transition frequency ``omega0``. Basis ordering is fixed::

    index 0          -> atom excited, field in vacuum
    index l + M + 1  -> atom in ground state, one photon in cavity l (l = -M..M)

Every other module indexes against this ordering.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ModelParams",
    "Hamiltonian",
    "ResonanceOutsideBandError",
    "WeakCouplingWarning",
    "build_hamiltonian",
    "dispersion",
    "coupling_spectrum",
    "resonance_wavenumber",
    "fermi_golden_rule_rate",
]

WEAK_COUPLING_LIMIT = 0.5


class WeakCouplingWarning(UserWarning):
    """Raised (as a warning) when g0/J is too large for golden-rule comparisons."""


class ResonanceOutsideBandError(ValueError):
    """The atomic frequency lies outside the photonic band."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the lattice plus the truncation half-width ``M``.

    Frequencies are angular frequencies; with ``J = 1`` time is measured in
    units of ``1/J``.
    """

    omega0: float = 0.0
    omega_c: float = 0.0
    J: float = 1.0
    g0: float = 0.2
    M: int = 260

    def __post_init__(self):
        if not self.J > 0:
            raise ValueError(f"hopping rate J must be > 0, got {self.J}")
        if not self.g0 >= 0:
            raise ValueError(f"coupling g0 must be >= 0, got {self.g0}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"lattice half-width M must be an integer >= 1, got {self.M}")
        object.__setattr__(self, "M", int(self.M))
        if self.g0 / self.J > WEAK_COUPLING_LIMIT:
            warnings.warn(
                f"g0/J = {self.g0 / self.J:.3g} exceeds {WEAK_COUPLING_LIMIT}; "
                "golden-rule comparisons assume weak coupling",
                WeakCouplingWarning,
                stacklevel=3,
            )

    @property
    def detuning(self) -> float:
        """Cavity detuning ``omega_c - omega0`` (site energy in the rotating frame)."""
        return self.omega_c - self.omega0

    @property
    def n_sites(self) -> int:
        return 2 * self.M + 1

    @property
    def dim(self) -> int:
        return 2 * self.M + 2

    def site_index(self, l: int) -> int:
        """Position of cavity ``l`` in the state vector."""
        if abs(l) > self.M:
            raise IndexError(f"site {l} outside lattice -{self.M}..{self.M}")
        return l + self.M + 1

    def with_M(self, M: int) -> "ModelParams":
        return ModelParams(self.omega0, self.omega_c, self.J, self.g0, M)


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Sparse one-excitation Hamiltonian in the rotating frame.

    ``matrix`` is normally real symmetric; tests may build complex Hermitian
    variants directly to probe broken time-reversal symmetry.
    """

    matrix: sp.csr_matrix
    params: ModelParams

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, vec):
        return self.matrix @ vec

    def energy(self, vec: np.ndarray) -> float:
        return float(np.real(np.vdot(vec, self.matrix @ vec)))


def build_hamiltonian(params: ModelParams) -> Hamiltonian:
    """Assemble the (2M+2)x(2M+2) sparse Hamiltonian.

    Diagonal: 0 for the atom, ``omega_c - omega0`` for every site. Nearest
    neighbour sites couple with ``-J``; the atom couples to site 0 with ``g0``.
    All structural entries are stored explicitly, even when zero.
    """
    M, J, g0 = params.M, params.J, params.g0
    dim = params.dim
    sites = np.arange(1, dim)

    diag_rows = np.arange(dim)
    diag_vals = np.full(dim, params.detuning, dtype=float)
    diag_vals[0] = 0.0

    hop_a, hop_b = sites[:-1], sites[1:]
    hop_rows = np.concatenate([hop_a, hop_b])
    hop_cols = np.concatenate([hop_b, hop_a])
    hop_vals = np.full(hop_rows.size, -J, dtype=float)

    s0 = params.site_index(0)
    cpl_rows = np.array([0, s0])
    cpl_cols = np.array([s0, 0])
    cpl_vals = np.array([g0, g0], dtype=float)

    rows = np.concatenate([diag_rows, hop_rows, cpl_rows])
    cols = np.concatenate([diag_rows, hop_cols, cpl_cols])
    vals = np.concatenate([diag_vals, hop_vals, cpl_vals])
    # No duplicates by construction, so csr keeps the explicit zeros.
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    assert matrix.nnz == dim + 4 * M + 2
    return Hamiltonian(matrix=matrix, params=params)


def dispersion(params: ModelParams, k):
    """Rotating-frame detuning ``Omega(k) = omega_c - omega0 - 2J cos(k)``."""
    return params.detuning - 2.0 * params.J * np.cos(k)


def coupling_spectrum(params: ModelParams) -> float:
    """Flat k-space coupling ``g0 / sqrt(2 pi)``."""
    return params.g0 / math.sqrt(2.0 * math.pi)


def resonance_wavenumber(params: ModelParams) -> tuple[float, float]:
    """Return ``(k0, v_g)`` with ``omega(+-k0) = omega0`` and ``v_g = 2J sin k0``."""
    cos_k0 = params.detuning / (2.0 * params.J)
    if abs(cos_k0) >= 1.0:
        raise ResonanceOutsideBandError(
            f"|omega0 - omega_c| = {abs(params.detuning):.6g} >= 2J = {2 * params.J:.6g}: "
            "no propagating mode at the atomic frequency"
        )
    k0 = math.acos(cos_k0)
    return k0, 2.0 * params.J * math.sin(k0)


def fermi_golden_rule_rate(params: ModelParams) -> float:
    """Closed-form golden-rule rate ``4 pi |g(k0)|^2 / v_g``.

    Equals ``g0**2 / J`` when the atom sits at the band centre.
    """
    _, v_g = resonance_wavenumber(params)
    return 4.0 * math.pi * coupling_spectrum(params) ** 2 / v_g
