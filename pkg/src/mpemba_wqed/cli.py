"""Command-line entry point: ``mpemba-wqed run|rate|kernel|volterra|state|check``.

Exit codes: 0 success, 2 config/usage error, 3 light-cone guard error,
4 numerical-tolerance or validation failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import kernel as kern
from .experiment import ConfigError, ExperimentConfig, load_config, run_checks, run_experiment
from .model import ModelParams, ResonanceOutsideBandError
from .propagate import GuardViolationError, ToleranceError, required_half_width
from .states import canonical_state, dark_state, load_state, save_state, time_reversed_state

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_NUMERIC = 0, 2, 3, 4
# Principal-value quadrature noise below this is printed as an exact zero.
PRINT_FLOOR = 1e-12


def _add_params(p: argparse.ArgumentParser, with_M: bool = False) -> None:
    p.add_argument("--J", type=float, default=1.0, help="hopping rate (default 1)")
    p.add_argument("--g0", type=float, default=0.2, help="atom-cavity coupling (default 0.2)")
    p.add_argument("--omega0", type=float, default=0.0, help="atomic frequency (default 0)")
    p.add_argument("--detuning", type=float, default=0.0, help="omega_c - omega0 (default 0)")
    if with_M:
        p.add_argument("--M", default="auto", help="lattice half-width or 'auto'")


def _params(args, M: int = 8) -> ModelParams:
    return ModelParams(omega0=args.omega0, omega_c=args.omega0 + args.detuning, J=args.J, g0=args.g0, M=M)


def _resolve_M(arg, needed: int) -> int:
    if arg in (None, "auto"):
        return needed
    try:
        return int(arg)
    except ValueError:
        raise ConfigError(f"--M must be an integer or 'auto', got {arg!r}") from None


def _fmt(x: float) -> str:
    return f"{0.0 if abs(x) < PRINT_FLOOR else x:.10g}"


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    summary = run_experiment(cfg, out_dir=args.out, override_guard=args.override_guard)
    out = Path(args.out or cfg.outputs)
    print(f"wrote {out / 'curves.csv'}, {out / 'curves_log.csv'}, {out / 'summary.json'}")
    for name, rep in summary["crossings"].items():
        print(f"{name}: {rep['verdict']} (persistent crossing {rep['persistent_crossing']})")
    return EXIT_OK


def cmd_rate(args) -> int:
    p = _params(args)
    m = kern.markov_rate_and_shift(p)
    if args.json:
        print(json.dumps({"gamma": m.gamma, "delta": m.delta, "k0": m.k0, "v_g": m.v_g}))
    else:
        print(f"gamma={_fmt(m.gamma)}")
        print(f"delta={_fmt(m.delta)}")
    return EXIT_OK


def cmd_kernel(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.state:
        state = load_state(args.state)
        p = _params(args, M=state.M)
    else:
        state, p = None, _params(args)
    kd = kern.memory_kernel(p, args.tau_max, args.h)
    kern.write_csv(out / "kernel.csv", kd.tau_grid, kd.values, label="tau")
    print(f"kernel: {kd.tau_grid.size} points, N_k={kd.n_k}, memory time {kd.memory_time}")
    if state is not None:
        fd = kern.forcing_term(p, state, kd.tau_grid)
        kern.write_csv(out / "forcing.csv", fd.t_grid, fd.values, label="t")
        print(f"forcing: {fd.t_grid.size} points, N_k={fd.n_k}")
    return EXIT_OK


def cmd_volterra(args) -> int:
    state = load_state(args.state)
    p = _params(args, M=state.M)
    t, c, err = kern.solve_atom_amplitude(p, state, args.horizon, args.h, error_estimate=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "re", "im", "D"])
        for ti, ci in zip(t, c):
            w.writerow([f"{ti:.17g}", f"{ci.real:.17g}", f"{ci.imag:.17g}", f"{abs(ci) ** 2:.17g}"])
    print(f"wrote {args.out}: {t.size} points, error estimate {err:.3g}")
    if args.max_error is not None and err > args.max_error:
        print(f"error estimate {err:.3g} exceeds --max-error {args.max_error:g}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_state(args) -> int:
    if args.kind == "canonical":
        M = _resolve_M(args.M, 8)
        st = canonical_state(_params(args, M))
    elif args.kind == "time_reversed":
        M = _resolve_M(args.M, required_half_width(args.J, args.t_f))
        st = time_reversed_state(_params(args, M), args.t_f)
    else:
        M = _resolve_M(args.M, 2 * args.L + 8)
        st = dark_state(_params(args, M), args.L)
    out = Path(args.out)
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    save_state(st, out)
    print(f"wrote {out}: M={st.M}, |c_a|^2={abs(st.atom_amp) ** 2:.10g}")
    return EXIT_OK


def cmd_check(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        params, t_f, L = cfg.params().with_M(8), cfg.t_f, cfg.L
    elif args.paper_config:
        cfg = ExperimentConfig()
        params, t_f, L = cfg.params().with_M(8), cfg.t_f, cfg.L
    else:
        params, t_f, L = _params(args), args.t_f, args.L
    results = run_checks(params, t_f=t_f, L=L)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.3e} (limit {r.limit:.0e})")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpemba-wqed", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a JSON-configured experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory (overrides config 'outputs')")
    p.add_argument("--override-guard", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("rate", help="print golden-rule rate and Lamb shift")
    _add_params(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("kernel", help="dump memory kernel (and forcing for --state)")
    _add_params(p)
    p.add_argument("--tau-max", type=float, default=50.0)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--state", default=None)
    p.add_argument("--out", default="kernel_out")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("volterra", help="solve the memory-kernel equation for a state file")
    _add_params(p)
    p.add_argument("--state", required=True)
    p.add_argument("--horizon", type=float, default=50.0)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--max-error", type=float, default=None)
    p.add_argument("--out", default="volterra.csv")
    p.set_defaults(func=cmd_volterra)

    p = sub.add_parser("state", help="write an initial-state JSON file")
    p.add_argument("kind", choices=["canonical", "time_reversed", "dark"])
    _add_params(p, with_M=True)
    p.add_argument("--t-f", dest="t_f", type=float, default=20.0)
    p.add_argument("--L", type=int, default=20)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_state)

    p = sub.add_parser("check", help="run symmetry and cross-solver validations")
    _add_params(p)
    p.add_argument("--paper-config", action="store_true")
    p.add_argument("--config", default=None)
    p.add_argument("--t-f", dest="t_f", type=float, default=20.0)
    p.add_argument("--L", type=int, default=20)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "state" and args.out is None:
        args.out = f"states/{args.kind}.json"
    try:
        return args.func(args)
    except GuardViolationError as exc:
        print(f"guard error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ToleranceError, kern.QuadratureError) as exc:
        print(f"tolerance error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ResonanceOutsideBandError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
