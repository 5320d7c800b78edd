"""Memory-kernel route to the atom amplitude.

Eliminating the field exactly gives a Volterra integro-differential equation

    dc/dt = F(t) - int_0^t G(t - s) c(s) ds

with the bath correlation ``G(tau) = int dk |g(k)|^2 exp(-i Omega(k) tau)``
and forcing ``F(t) = -i int dk g(k) phi0(k) exp(-i Omega(k) t)``. Both are
evaluated by periodic trapezoid quadrature over the Brillouin zone, which is
spectrally accurate for these smooth periodic integrands.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, optimize

from .model import ModelParams, coupling_spectrum, dispersion, resonance_wavenumber
from .propagate import ExcitationState
from .states import wannier_to_bloch

__all__ = [
    "KernelData",
    "ForcingData",
    "MarkovData",
    "QuadratureError",
    "memory_kernel",
    "forcing_term",
    "solve_volterra",
    "solve_atom_amplitude",
    "markov_rate_and_shift",
    "markov_decay",
    "write_csv",
]

QUAD_TOL = 1e-10
MAX_NK = 2 ** 16
PV_WINDOW = 1e-3


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class KernelData:
    tau_grid: np.ndarray
    values: np.ndarray
    n_k: int

    @property
    def step(self) -> float:
        return float(self.tau_grid[1] - self.tau_grid[0])

    @property
    def memory_time(self) -> float | None:
        """First ``tau`` where ``|G|`` drops below 1% of ``G(0)``; None if never."""
        below = np.nonzero(np.abs(self.values) < 0.01 * abs(self.values[0]))[0]
        return float(self.tau_grid[below[0]]) if below.size else None


@dataclass(frozen=True, eq=False)
class ForcingData:
    t_grid: np.ndarray
    values: np.ndarray
    n_k: int


@dataclass(frozen=True)
class MarkovData:
    gamma: float
    delta: float
    k0: float
    v_g: float


def _uniform_grid(t_max: float, h: float) -> np.ndarray:
    n = int(math.floor(t_max / h + 1e-9))
    return np.arange(n + 1) * h


def _converged_sum(evaluate, n_k: int, what: str):
    """Double ``n_k`` until two successive quadratures agree to ``QUAD_TOL``."""
    prev = evaluate(n_k)
    while True:
        if 2 * n_k > MAX_NK:
            raise QuadratureError(f"{what}: quadrature not converged at N_k={n_k}")
        n_k *= 2
        cur = evaluate(n_k)
        if np.max(np.abs(cur - prev)) < QUAD_TOL:
            return cur, n_k
        prev = cur


def _kgrid(n_k: int) -> np.ndarray:
    return -math.pi + 2.0 * math.pi * np.arange(n_k) / n_k


def _phase_sum(params: ModelParams, weights_k, times: np.ndarray, n_k: int) -> np.ndarray:
    """``(2 pi / N_k) sum_i w(k_i) exp(-i Omega(k_i) t)`` for every ``t``, in chunks."""
    k = _kgrid(n_k)
    omega = dispersion(params, k)
    w = weights_k(k) * (2.0 * math.pi / n_k)
    out = np.empty(times.size, dtype=complex)
    chunk = max(1, 2 ** 22 // n_k)
    for a in range(0, times.size, chunk):
        t = times[a:a + chunk]
        out[a:a + chunk] = np.exp(-1j * np.outer(t, omega)) @ w
    return out


def _initial_nk(params: ModelParams, t_max: float, floor: int = 64) -> int:
    # Integrand bandwidth in k is about 2 J t_max.
    n = max(floor, int(2 * params.J * t_max + 32))
    return 1 << (n - 1).bit_length()


def memory_kernel(params: ModelParams, tau_max: float, h: float, n_k: int | None = None) -> KernelData:
    """Sample ``G(tau)`` on ``0, h, ..., tau_max``.

    ``n_k`` is a starting point; it is doubled until the values change by
    less than ``1e-10``.
    """
    tau = _uniform_grid(tau_max, h)
    g2 = coupling_spectrum(params) ** 2
    start = n_k or _initial_nk(params, tau_max)
    values, used = _converged_sum(
        lambda n: _phase_sum(params, lambda k: np.full(k.shape, g2), tau, n), start, "memory kernel"
    )
    return KernelData(tau_grid=tau, values=values, n_k=used)


def forcing_term(params: ModelParams, initial: ExcitationState, t_grid, n_k: int | None = None) -> ForcingData:
    """Sample ``F(t)`` for the field part of ``initial``; ``F(0) = -i g0 q_0``."""
    t_grid = np.asarray(t_grid, dtype=float)
    if initial.M != params.M:
        raise ValueError(f"state has M={initial.M}, params have M={params.M}")
    g = coupling_spectrum(params)
    if not np.any(initial.field_amps):
        return ForcingData(t_grid=t_grid, values=np.zeros(t_grid.size, dtype=complex), n_k=0)
    floor = 2 * params.n_sites
    start = max(n_k or 0, _initial_nk(params, float(t_grid.max()) + params.M, floor))
    start = 1 << (start - 1).bit_length()

    def evaluate(n):
        phi0 = wannier_to_bloch(initial, n)
        return -1j * _phase_sum(params, lambda k: g * phi0.amps, t_grid, n)

    values, used = _converged_sum(evaluate, start, "forcing term")
    return ForcingData(t_grid=t_grid, values=values, n_k=used)


def _resample(src_grid: np.ndarray, src_values: np.ndarray, t_grid: np.ndarray, what: str) -> np.ndarray:
    """Values on ``t_grid``: exact subsampling when grids nest, else linear interpolation."""
    if t_grid[-1] > src_grid[-1] + 1e-9:
        raise ValueError(f"{what} grid ends at {src_grid[-1]:g}, need {t_grid[-1]:g}")
    h_src = src_grid[1] - src_grid[0]
    h = t_grid[1] - t_grid[0]
    if h < h_src * (1 - 1e-9):
        raise ValueError(f"{what} grid step {h_src:g} coarser than solver step {h:g}")
    ratio = h / h_src
    if abs(ratio - round(ratio)) < 1e-9:
        idx = np.rint(t_grid / h_src).astype(int)
        return src_values[idx]
    return np.interp(t_grid, src_grid, src_values.real) + 1j * np.interp(t_grid, src_grid, src_values.imag)


def solve_volterra(params: ModelParams, c_a0: complex, kernel: KernelData | None,
                   forcing: ForcingData | None, t_grid, markov: MarkovData | None = None) -> np.ndarray:
    """Product-trapezoid solution of the Volterra equation on a uniform ``t_grid``.

    The memory integral uses trapezoid weights and the time step is the
    trapezoid rule, so the scheme is second order. The ``c(t_{n+1})``
    dependence enters linearly through the endpoint weight and is solved for
    exactly each step. Cost is O(N^2) in the grid length.

    If ``markov`` is given the kernel is replaced by ``(Gamma/2 + i Delta)``
    times a delta function, i.e. ``dc/dt = F - (Gamma/2 + i Delta) c``.
    """
    t = np.asarray(t_grid, dtype=float)
    n = t.size
    if n < 2:
        raise ValueError("t_grid needs at least two points")
    h = t[1] - t[0]
    if np.max(np.abs(np.diff(t) - h)) > 1e-9 * max(1.0, h):
        raise ValueError("t_grid must be uniform")
    f = np.zeros(n, dtype=complex) if forcing is None else _resample(forcing.t_grid, forcing.values, t, "forcing")
    c = np.empty(n, dtype=complex)
    c[0] = c_a0
    half = 0.5 * h

    if markov is not None:
        rate = 0.5 * markov.gamma + 1j * markov.delta
        for i in range(n - 1):
            c[i + 1] = (c[i] + half * (f[i] - rate * c[i] + f[i + 1])) / (1.0 + half * rate)
        return c

    if kernel is None:
        raise ValueError("kernel required unless markov surrogate is used")
    g = _resample(kernel.tau_grid, kernel.values, t, "kernel")
    # memory[i] = int_0^{t_i} G(t_i - s) c(s) ds, trapezoid rule
    memory = np.zeros(n, dtype=complex)
    for i in range(n - 1):
        m = i + 1
        # all terms of memory[m] except the c[m] endpoint
        partial = h * (0.5 * g[m] * c[0] + np.dot(g[m - 1:0:-1], c[1:m]))
        rhs = c[i] + half * (f[i] - memory[i] + f[m] - partial)
        c[m] = rhs / (1.0 + half * half * g[0])
        memory[m] = partial + half * g[0] * c[m]
    return c


def solve_atom_amplitude(params: ModelParams, initial: ExcitationState, horizon: float,
                         h: float, error_estimate: bool = False):
    """Volterra solution for ``c_a(t)`` on ``0, h, ..., horizon``.

    Returns ``(t, c)``, or ``(t, c, err)`` when ``error_estimate`` is set, where
    ``err`` is the Richardson estimate ``max |c_h - c_{h/2}| / 3`` of the
    error in ``c_h``.
    """
    fine = h / 2 if error_estimate else h
    kern = memory_kernel(params, horizon, fine)
    force = forcing_term(params, initial, kern.tau_grid)
    t = _uniform_grid(horizon, h)
    c = solve_volterra(params, initial.atom_amp, kern, force, t)
    if not error_estimate:
        return t, c
    c_fine = solve_volterra(params, initial.atom_amp, kern, force, kern.tau_grid)
    err = float(np.max(np.abs(c - c_fine[::2][: c.size]))) / 3.0
    return t, c, err


def markov_rate_and_shift(params: ModelParams, window: float = PV_WINDOW) -> MarkovData:
    """Golden-rule rate and Lamb shift of the Markov limit.

    The delta function is reduced analytically: roots ``+-k0`` of
    ``Omega(k) = 0`` are located numerically and each contributes
    ``2 pi |g|^2 / v_g``. The shift is the principal value of
    ``int dk |g|^2 / (-Omega(k))``, computed with symmetric excision of width
    ``window`` around each root and Richardson-extrapolated from ``window`` and
    ``window/2``.
    """
    resonance_wavenumber(params)  # raises outside the band
    J = params.J
    g2 = coupling_spectrum(params) ** 2
    omega = lambda k: dispersion(params, k)
    k0 = optimize.brentq(omega, 0.0, math.pi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    v_g = abs(2.0 * J * math.sin(k0))
    gamma = 2.0 * (2.0 * math.pi * g2 / v_g)

    def excised(eps):
        if not g2:
            return 0.0
        edges = [-math.pi, -k0 - eps, -k0 + eps, k0 - eps, k0 + eps, math.pi]
        total = 0.0
        for a, b in ((edges[0], edges[1]), (edges[2], edges[3]), (edges[4], edges[5])):
            if b > a:
                val, _ = integrate.quad(lambda k: -1.0 / omega(k), a, b,
                                        epsabs=1e-14, epsrel=1e-13, limit=400)
                total += val
        return g2 * total

    delta = 2.0 * excised(window / 2) - excised(window)
    return MarkovData(gamma=gamma, delta=delta, k0=k0, v_g=v_g)


def markov_decay(markov: MarkovData, t):
    """Markov-limit amplitude ``exp(-(Gamma/2 + i Delta) t)``."""
    return np.exp(-(0.5 * markov.gamma + 1j * markov.delta) * np.asarray(t))


def write_csv(path: str | Path, grid, values, label: str = "t") -> None:
    """Columns ``t_or_tau, re, im`` at full round-trip precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([label, "re", "im"])
        for x, v in zip(grid, values):
            w.writerow([f"{x:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
