import hypothesis
import numpy as np
import pytest

from mpemba_wqed.model import ModelParams, build_hamiltonian
from mpemba_wqed.propagate import evolve
from mpemba_wqed.states import canonical_state, dark_state, time_reversed_state

np.seterr(all="warn", under="ignore")

hypothesis.settings.register_profile("default", max_examples=30, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile("default")

HORIZON = 120.0
T_F = 20.0
L_DARK = 20


@pytest.fixture(scope="session")
def ref_params():
    # M = ceil(2 J max(horizon, 2 t_f)) + 8
    return ModelParams(omega0=0.0, omega_c=0.0, J=1.0, g0=0.2, M=248)


@pytest.fixture(scope="session")
def ref_h(ref_params):
    return build_hamiltonian(ref_params)


@pytest.fixture(scope="session")
def reference_runs(ref_params, ref_h):
    """Canonical, time-reversed and dark-state runs at the reference parameters."""
    states = {
        "canonical": canonical_state(ref_params),
        "time_reversed": time_reversed_state(ref_params, T_F),
        "dark": dark_state(ref_params, L_DARK),
    }
    return {name: evolve(s, ref_h, HORIZON) for name, s in states.items()}, states


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion; the test asserts afterwards."""

    def record(label, passed, detail):
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
