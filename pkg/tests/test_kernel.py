import math

import numpy as np
import pytest

from mpemba_wqed.kernel import (
    MarkovData,
    forcing_term,
    markov_decay,
    markov_rate_and_shift,
    memory_kernel,
    solve_atom_amplitude,
    solve_volterra,
    write_csv,
)
from mpemba_wqed.model import ModelParams, ResonanceOutsideBandError, build_hamiltonian, fermi_golden_rule_rate
from mpemba_wqed.propagate import evolve
from mpemba_wqed.states import canonical_state, custom_state, dark_state

from oracles import bessel_j, extrapolated_lorentzian_gamma


def test_kernel_at_zero():
    k = memory_kernel(ModelParams(g0=0.2, M=5), 5.0, 0.1)
    assert k.values[0] == pytest.approx(0.04, abs=1e-15)


def test_kernel_bessel_identity_resonant():
    p = ModelParams(g0=0.2, J=1.0, M=5)
    k = memory_kernel(p, 50.0, 0.05)
    oracle = 0.04 * bessel_j(0, 2 * k.tau_grid)
    assert np.max(np.abs(k.values - oracle)) < 1e-8
    assert k.values[10].real / 0.04 == pytest.approx(0.765198, abs=1e-6)  # tau = 1/(2J)


def test_kernel_phase_factorization_detuned():
    p = ModelParams(omega0=0.0, omega_c=0.7, J=1.3, g0=0.2, M=5)
    k = memory_kernel(p, 20.0, 0.1)
    oracle = np.exp(-0.7j * k.tau_grid) * 0.04 * bessel_j(0, 2 * 1.3 * k.tau_grid)
    np.testing.assert_allclose(k.values, oracle, atol=1e-10)


def test_kernel_quadrature_converged():
    p = ModelParams(g0=0.2, M=5)
    k = memory_kernel(p, 30.0, 0.1)
    k2 = memory_kernel(p, 30.0, 0.1, n_k=2 * k.n_k)
    assert np.max(np.abs(k.values - k2.values)) < 1e-10
    assert k.memory_time is not None and 0 < k.memory_time < 30


def test_forcing_canonical_is_zero():
    p = ModelParams(M=10)
    f = forcing_term(p, canonical_state(p), np.linspace(0, 5, 11))
    np.testing.assert_array_equal(f.values, 0)


def test_forcing_point_photon():
    p = ModelParams(g0=0.2, M=10)
    field = np.zeros(p.n_sites)
    field[p.M] = 1.0
    s, _ = custom_state(0.0, field)
    t = np.linspace(0, 30, 61)
    f = forcing_term(p, s, t)
    np.testing.assert_allclose(f.values, -0.2j * bessel_j(0, 2 * t), atol=1e-10)


def test_forcing_dark_state():
    p = ModelParams(g0=0.2, M=48)
    s = dark_state(p, 20)
    t = np.linspace(0, 40, 81)
    f = forcing_term(p, s, t)
    assert f.values[0] == pytest.approx(1j * s.atom_amp, abs=1e-12)
    # F(t) = -i g0 sum_l q_l i^l J_l(2 J t)
    l = np.arange(-p.M, p.M + 1)
    nz = np.nonzero(s.field_amps)[0]
    oracle = sum(-0.2j * s.field_amps[i] * (1j ** l[i]) * bessel_j(int(l[i]), 2 * t) for i in nz)
    np.testing.assert_allclose(f.values, oracle, atol=1e-10)


def test_markov_resonant():
    m = markov_rate_and_shift(ModelParams(g0=0.2, M=5))
    assert m.gamma == pytest.approx(0.04, rel=1e-6)
    assert abs(m.delta) < 1e-8
    assert m.k0 == pytest.approx(math.pi / 2) and m.v_g == pytest.approx(2.0)


def test_markov_detuned_against_lorentzian_oracle():
    p = ModelParams(omega0=0.0, omega_c=1.0, J=1.0, g0=0.2, M=5)
    m = markov_rate_and_shift(p)
    assert m.gamma == pytest.approx(2 * 0.04 / math.sqrt(3), rel=1e-12)
    assert extrapolated_lorentzian_gamma(p) == pytest.approx(m.gamma, rel=1e-5)
    # the principal value vanishes anywhere inside the cosine band
    assert abs(m.delta) < 1e-8


@pytest.mark.parametrize("detuning", [-1.5, -0.4, 0.0, 0.9, 1.8])
def test_markov_matches_golden_rule(detuning):
    p = ModelParams(omega0=0.1, omega_c=0.1 + detuning, J=1.0, g0=0.15, M=5)
    assert markov_rate_and_shift(p).gamma == pytest.approx(fermi_golden_rule_rate(p), rel=1e-6)


def test_markov_zero_coupling():
    m = markov_rate_and_shift(ModelParams(g0=0.0, M=5))
    assert m.gamma == 0.0 and m.delta == 0.0


def test_markov_outside_band():
    with pytest.raises(ResonanceOutsideBandError):
        markov_rate_and_shift(ModelParams(omega_c=2.5, M=5))


@pytest.mark.parametrize("gamma,delta,t,absq,phase", [
    (0.04, 0.0, 25.0, math.exp(-1), 0.0),
    (0.04, 0.0, 0.0, 1.0, 0.0),
    (0.04, 0.01, 10.0, math.exp(-0.4), -0.1),
])
def test_markov_decay(gamma, delta, t, absq, phase):
    a = markov_decay(MarkovData(gamma, delta, math.pi / 2, 2.0), t)
    assert abs(a) ** 2 == pytest.approx(absq, rel=1e-14)
    assert np.angle(a) == pytest.approx(phase, abs=1e-14)


def test_volterra_markov_surrogate():
    m = MarkovData(0.04, 0.01, math.pi / 2, 2.0)
    t = np.arange(0, 501) * 0.1
    c = solve_volterra(ModelParams(M=5), 1.0, None, None, t, markov=m)
    np.testing.assert_allclose(c, markov_decay(m, t), atol=1e-6)


def test_volterra_canonical_golden_rule():
    p = ModelParams(g0=0.2, M=5)
    t, c = solve_atom_amplitude(p, canonical_state(p), 30.0, 0.05)
    assert abs(c[500]) ** 2 == pytest.approx(math.exp(-1), rel=0.05)


@pytest.mark.parametrize("which", ["canonical", "dark"])
def test_volterra_vs_lattice_second_order(which):
    p = ModelParams(g0=0.2, M=108)
    s = canonical_state(p) if which == "canonical" else dark_state(p, 20)
    tr = evolve(s, build_hamiltonian(p), 50.0, sample_step=0.1)
    discrepancies = []
    for h in (0.1, 0.05, 0.025):
        _, c = solve_atom_amplitude(p, s, 50.0, h)
        stride = int(round(0.1 / h))
        discrepancies.append(np.max(np.abs(np.abs(c[::stride]) - np.abs(tr.atom_amps))))
    assert discrepancies[1] < 1e-3
    assert discrepancies[2] < 1e-5
    ratios = [discrepancies[i] / discrepancies[i + 1] for i in range(2)]
    assert min(ratios) > 2 ** 1.9


def test_volterra_error_estimate_contract():
    p = ModelParams(g0=0.2, M=5)
    t, c, err = solve_atom_amplitude(p, canonical_state(p), 20.0, 0.1, error_estimate=True)
    _, c_half = solve_atom_amplitude(p, canonical_state(p), 20.0, 0.05)
    assert np.max(np.abs(c - c_half[::2])) < 4 * err


def test_volterra_rejects_coarse_kernel():
    p = ModelParams(g0=0.2, M=5)
    k = memory_kernel(p, 10.0, 0.1)
    with pytest.raises(ValueError, match="coarser"):
        solve_volterra(p, 1.0, k, None, np.arange(0, 101) * 0.05)


def test_volterra_subsamples_finer_kernel():
    p = ModelParams(g0=0.2, M=5)
    fine = memory_kernel(p, 10.0, 0.05)
    coarse = memory_kernel(p, 10.0, 0.1)
    t = np.arange(0, 101) * 0.1
    np.testing.assert_array_equal(solve_volterra(p, 1.0, fine, None, t), solve_volterra(p, 1.0, coarse, None, t))


def test_csv_format(tmp_path):
    write_csv(tmp_path / "k.csv", [0.0, 0.1], np.array([1 / 3 + 0.5j, 0.75 - 0.125j]), label="tau")
    text = (tmp_path / "k.csv").read_bytes().decode()
    assert "\r" not in text
    assert text.splitlines() == ["tau,re,im", "0,0.33333333333333331,0.5", "0.10000000000000001,0.75,-0.125"]
