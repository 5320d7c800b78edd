"""Config-driven reproduction of the three relaxation curves plus a validation suite."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.special import j0

from . import kernel as kern
from .model import ModelParams, build_hamiltonian, fermi_golden_rule_rate
from .observables import detect_mpemba_crossing, estimate_delay, fit_decay_rate, initial_slope, is_contractive
from .propagate import GuardViolationError, check_truncation, evolve_batch, required_half_width
from .states import canonical_state, dark_state, save_state, time_reversed_state
from .symmetry import is_time_reversal_symmetric, reversal_roundtrip_check

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "run_experiment",
    "run_checks",
    "CURVES",
    "SCHEMA_VERSION",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CURVES = ("canonical", "time_reversed", "dark")
LOG_SAMPLES = 200


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Experiment parameters; defaults reproduce the reference figure."""

    J: float = 1.0
    g0_over_J: float = 0.2
    omega0: float = 0.0
    omega_c: float = 0.0
    M: int | str = "auto"
    horizon: float = 120.0
    sample_step: float = 0.1
    t_f: float = 20.0
    L: int = 20
    tol: float = 1e-10
    outputs: str = "out"
    curves: list[str] = field(default_factory=lambda: list(CURVES))

    def __post_init__(self):
        for name in ("J", "g0_over_J", "omega0", "omega_c", "horizon", "sample_step", "t_f", "tol"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"key '{name}': expected a number, got {val!r}")
            setattr(self, name, float(val))
        if self.J <= 0 or self.horizon <= 0 or self.sample_step <= 0 or self.tol <= 0:
            raise ConfigError("keys 'J', 'horizon', 'sample_step', 'tol' must be positive")
        if self.t_f < 0 or self.g0_over_J < 0:
            raise ConfigError("keys 't_f' and 'g0_over_J' must be non-negative")
        if isinstance(self.L, bool) or not isinstance(self.L, int) or self.L < 0:
            raise ConfigError(f"key 'L': expected a non-negative integer, got {self.L!r}")
        if self.M != "auto" and (isinstance(self.M, bool) or not isinstance(self.M, int) or self.M < 1):
            raise ConfigError(f"key 'M': expected a positive integer or \"auto\", got {self.M!r}")
        if not isinstance(self.curves, list) or not self.curves:
            raise ConfigError("key 'curves': expected a non-empty list")
        bad = [c for c in self.curves if c not in CURVES]
        if bad:
            raise ConfigError(f"key 'curves': unknown curve(s) {bad}; choose from {list(CURVES)}")
        if not isinstance(self.outputs, str):
            raise ConfigError("key 'outputs': expected a directory path string")
        # canonical column order regardless of listing order
        self.curves = [c for c in CURVES if c in self.curves]

    @property
    def g0(self) -> float:
        return self.g0_over_J * self.J

    @property
    def guard_horizon(self) -> float:
        return max(self.horizon, 2.0 * self.t_f)

    def resolved_M(self) -> int:
        if self.M == "auto":
            return required_half_width(self.J, self.guard_horizon)
        return int(self.M)

    def params(self) -> ModelParams:
        return ModelParams(self.omega0, self.omega_c, self.J, self.g0, self.resolved_M())


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a JSON config; unknown keys are rejected."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}; allowed keys are {sorted(known)}")
    return ExperimentConfig(**raw)


def _fmt(x) -> str:
    return "" if x is None else f"{x:.17g}"


def _write_curves(path: Path, times, columns: dict[str, np.ndarray | None]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"D_{name}" for name in CURVES])
        for i, t in enumerate(times):
            w.writerow([_fmt(t)] + [_fmt(None if columns.get(n) is None else columns[n][i]) for n in CURVES])


def _log_resample(times: np.ndarray, columns: dict[str, np.ndarray]):
    t_min = times[1]
    grid = np.unique(np.geomspace(t_min, times[-1], LOG_SAMPLES))
    return grid, {n: np.interp(grid, times, d) for n, d in columns.items()}


def _fit_window(name: str, cfg: ExperimentConfig) -> tuple[float, float]:
    if name == "canonical":
        return 5.0 / cfg.J, 50.0 / cfg.J
    if name == "time_reversed":
        return cfg.t_f + 5.0 / cfg.J, cfg.t_f + 50.0 / cfg.J
    onset = cfg.L / cfg.J
    return onset + 10.0 / cfg.J, onset + 60.0 / cfg.J


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                   override_guard: bool = False) -> dict:
    """Evolve the requested curves, write datasets and return the summary dict."""
    out = Path(out_dir if out_dir is not None else cfg.outputs)
    params = cfg.params()
    guard = check_truncation(params, cfg.guard_horizon)
    if not guard.passed and not override_guard:
        raise GuardViolationError(
            f"M={params.M} too small for horizon {cfg.guard_horizon:g}: need M >= {guard.required_M}"
        )
    h = build_hamiltonian(params)

    initial = {}
    for name in cfg.curves:
        if name == "canonical":
            initial[name] = canonical_state(params)
        elif name == "time_reversed":
            initial[name] = time_reversed_state(params, cfg.t_f, cfg.tol, override_guard=override_guard)
        else:
            initial[name] = dark_state(params, cfg.L)
    log.info("evolving %s with M=%d to t=%g", list(initial), params.M, cfg.horizon)
    trajs = dict(zip(initial, evolve_batch(list(initial.values()), h, cfg.horizon,
                                           sample_step=cfg.sample_step, tol=cfg.tol,
                                           override_guard=override_guard)))

    curves_summary = {}
    for name, tr in trajs.items():
        window = _fit_window(name, cfg)
        try:
            fit = fit_decay_rate(tr, window).to_dict()
        except ValueError as exc:
            fit = {"error": str(exc)}
        curves_summary[name] = {
            "D0": float(tr.distances[0]),
            "initial_slope": initial_slope(initial[name], params),
            "max_D": float(tr.distances.max()),
            "contractive": is_contractive(tr),
            "gamma_fit": fit,
            "max_norm_drift": tr.metadata["max_norm_drift"],
            "max_energy_drift_rel": tr.metadata["max_energy_drift_rel"],
        }

    crossings, delays = {}, {}
    search = (0.0, cfg.horizon / 2)
    for other in ("time_reversed", "dark"):
        if "canonical" in trajs and other in trajs:
            rep = detect_mpemba_crossing(trajs["canonical"], trajs[other])
            crossings[f"canonical_vs_{other}"] = rep.to_dict()
            delays[other] = estimate_delay(trajs["canonical"], trajs[other], search)

    try:
        m = kern.markov_rate_and_shift(params)
        markov = {"gamma": m.gamma, "delta": m.delta, "k0": m.k0, "v_g": m.v_g}
    except ValueError as exc:
        markov = {"error": str(exc)}

    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": asdict(cfg),
        "params": asdict(params),
        "guard": {**asdict(guard), "horizon": cfg.guard_horizon,
                  "overridden": bool(override_guard and not guard.passed)},
        "markov": markov,
        "curves": curves_summary,
        "crossings": crossings,
        "delays": delays,
        "max_norm_drift": max(c["max_norm_drift"] for c in curves_summary.values()),
        "max_energy_drift_rel": max(c["max_energy_drift_rel"] for c in curves_summary.values()),
    }

    out.mkdir(parents=True, exist_ok=True)
    times = next(iter(trajs.values())).times
    columns = {n: tr.distances for n, tr in trajs.items()}
    _write_curves(out / "curves.csv", times, columns)
    log_t, log_cols = _log_resample(times, columns)
    _write_curves(out / "curves_log.csv", log_t, log_cols)
    (out / "states").mkdir(exist_ok=True)
    for name, st in initial.items():
        save_state(st, out / "states" / f"{name}.json")
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float


def run_checks(params: ModelParams | None = None, t_f: float = 20.0, L: int = 20,
               horizon: float = 50.0, volterra_step: float = 0.05) -> list[CheckResult]:
    """Symmetry and cross-solver validations at the given (resonant by default) parameters."""
    base = params or ModelParams(omega0=0.0, omega_c=0.0, J=1.0, g0=0.2, M=8)
    J, g0 = base.J, base.g0
    results = []

    def record(name, value, limit):
        results.append(CheckResult(name, bool(value < limit), float(value), float(limit)))

    p_rt = base.with_M(max(base.M, required_half_width(J, 2 * t_f)))
    record("hamiltonian_time_reversal", 0.0 if is_time_reversal_symmetric(build_hamiltonian(p_rt)) else 1.0, 0.5)
    record("reversal_roundtrip_residual", reversal_roundtrip_check(p_rt, t_f), 1e-8)

    if base.detuning == 0.0:
        kd = kern.memory_kernel(base, horizon, 0.05)
        bessel = g0 ** 2 * j0(2 * J * kd.tau_grid)
        record("kernel_bessel_identity", np.max(np.abs(kd.values - bessel)), 1e-8)

    try:
        m = kern.markov_rate_and_shift(base)
        fgr = fermi_golden_rule_rate(base)
        record("markov_gamma_vs_golden_rule", abs(m.gamma - fgr) / max(fgr, 1e-300) if fgr else abs(m.gamma), 1e-6)
        record("lamb_shift_in_band", abs(m.delta), 1e-8)
    except ValueError:
        pass

    p_lat = base.with_M(max(base.M, required_half_width(J, horizon), 2 * L + 8))
    h = build_hamiltonian(p_lat)
    step = volterra_step
    states = {"canonical": canonical_state(p_lat)}
    if g0 > 0:
        states["dark"] = dark_state(p_lat, L)
    trajs = evolve_batch(list(states.values()), h, horizon, sample_step=step)
    for (name, st), tr in zip(states.items(), trajs):
        _, c = kern.solve_atom_amplitude(p_lat, st, horizon, step)
        n = min(c.size, tr.atom_amps.size)
        record(f"volterra_vs_lattice_{name}", np.max(np.abs(np.abs(c[:n]) - np.abs(tr.atom_amps[:n]))), 1e-3)
        record(f"norm_drift_{name}", tr.metadata["max_norm_drift"], 1e-9)

    if g0 > 0:
        d = dark_state(p_lat, L)
        residual = np.linalg.norm(h.matrix @ d.vector)
        expected = abs(d.atom_amp) * math.sqrt(J ** 2 + g0 ** 2 + 2 * J ** 4 / g0 ** 2)
        if base.detuning == 0.0:
            record("dark_state_residual", abs(residual - expected), 1e-10)
    return results
