"""Command-line entry point ``gerbeflow``.

Exit codes: 0 ok, 1 configuration or input error, 2 verification failure,
3 numerical abort, 4 inconclusive calibration. ``GERBEFLOW_THREADS`` caps
the BLAS/LAPACK thread pools.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .config import ConfigError, load_config
from .gfld import GfldError, atomic_write_text

__all__ = ["main", "EXIT_OK", "EXIT_CONFIG", "EXIT_VERIFY", "EXIT_ABORT", "EXIT_INCONCLUSIVE"]

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_ABORT, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4

CSV_HEADER = "tau,C1_max,C1_l2,C2_max,C2_l2,C3_max,C3_l2"


class _Fail(Exception):
    def __init__(self, code, msg):
        super().__init__(msg)
        self.code = code


def _clean(obj):
    """Replace non-finite floats by None so the JSON stays standard."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _write_json(path, payload):
    atomic_write_text(path, json.dumps(_clean(payload), indent=2, allow_nan=False) + "\n")


def _out_dir(cfg, args):
    out = args.out or cfg.out
    os.makedirs(out, exist_ok=True)
    return out


def _require(cfg, *sections):
    for sec in sections:
        if sec not in cfg.sections:
            raise _Fail(EXIT_CONFIG, f"{cfg.path}: missing section [{sec}]")


def cmd_verify(cfg, args):
    from .verify import run_suites
    checks = run_suites(cfg.N[0], cfg, seed=cfg.seed)
    passed = all(c.passed for c in checks)
    report = {
        "command": "verify",
        "levels": [cfg.N[0] * f for f in (1, 2, 4)],
        "seed": cfg.seed,
        "min_order": 3.5,
        "passed": passed,
        "failed": [f"{c.suite}/{c.name}" for c in checks if not c.passed],
        "checks": [c.as_dict() for c in checks],
    }
    _write_json(os.path.join(_out_dir(cfg, args), "verify_report.json"), report)
    for c in checks:
        order = f" order {min(c.orders):.2f}" if c.orders else ""
        print(f"{'PASS' if c.passed else 'FAIL'} {c.suite}/{c.name}: {c.values[-1]:.3e}{order}")
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_solve_constraints(cfg, args):
    from .cauchy import write_state
    from .constraint2d import AnsatzParams, HypothesisError, NewtonError, solve_conformal_constraints
    from .geometry import Metric
    from .grid import ScalarField
    _require(cfg, "grid", "constraints2d")
    if cfg.n != 2:
        raise _Fail(EXIT_CONFIG, f"{cfg.path}: solve-constraints needs n = 2 in [grid], got {cfg.n}")
    grid = cfg.grid()
    p = AnsatzParams(cfg.c, cfg.k, cfg.F, ScalarField(grid, cfg.phi.evaluate(grid)))
    try:
        sol = solve_conformal_constraints(p, Metric.euclidean(grid))
    except HypothesisError as exc:
        raise _Fail(EXIT_CONFIG, str(exc)) from None
    except NewtonError as exc:
        raise _Fail(EXIT_ABORT, str(exc)) from None
    out = _out_dir(cfg, args)
    write_state(os.path.join(out, "constraints_state.gfld"), sol.state)
    _write_json(os.path.join(out, "constraints_state.json"), {
        "c": cfg.c, "k": cfg.k, "F": cfg.F, "phi": cfg.phi.text,
        "residuals": sol.residuals,
        "newton_iters": sol.newton.iterations,
        "final_residual": sol.newton.final_residual,
        "history": sol.newton.history,
    })
    print(f"Newton: {sol.newton.iterations} iterations, residual {sol.newton.final_residual:.3e}; "
          + ", ".join(f"{k} {v:.3e}" for k, v in sol.residuals.items()))
    return EXIT_OK


def _row(values):
    return ",".join(format(float(v), ".17g") for v in values)


def cmd_evolve(cfg, args):
    from .cauchy import CauchyState, EvolutionConfig, NumericalAbort, evolve, read_state, write_state
    _require(cfg, "grid", "evolution")
    grid = cfg.grid()
    if args.state:
        try:
            state = read_state(args.state)
        except (OSError, GfldError) as exc:
            raise _Fail(EXIT_CONFIG, f"cannot load state: {exc}") from None
        if state.grid != grid:
            raise _Fail(EXIT_CONFIG, f"state grid {state.grid!r} differs from the config grid {grid!r}")
    else:
        state = CauchyState.flat(grid)
    try:
        ecfg = EvolutionConfig(lam=cfg.lam, dt=cfg.time_step(), steps=cfg.steps,
                               record_every=cfg.record_every, filter_modes=cfg.filter_modes)
        ecfg.check_cfl(grid)
    except ValueError as exc:
        raise _Fail(EXIT_CONFIG, str(exc)) from None
    out = _out_dir(cfg, args)
    rows = []
    keys = ("C1_max", "C1_l2", "C2_max", "C2_l2", "C3_max", "C3_l2")

    def on_record(s, res):
        write_state(os.path.join(out, f"state_{len(rows)}.gfld"), s)
        rows.append((s.tau,) + tuple(res.norms[k] for k in keys))

    def flush():
        atomic_write_text(os.path.join(out, "residuals.csv"),
                          "\n".join([CSV_HEADER] + [_row(r) for r in rows]) + "\n")

    try:
        evolve(state, ecfg, keep_states=False, on_record=on_record)
    except NumericalAbort as exc:
        flush()
        raise _Fail(EXIT_ABORT, str(exc)) from None
    flush()
    worst = max(max(r[1], r[3], r[5]) for r in rows)
    print(f"{len(rows)} records to tau = {rows[-1][0]:.6g}; max constraint {worst:.3e}")
    return EXIT_OK


def cmd_calibrate(cfg, args):
    from .cauchy import calibrate_identities
    _require(cfg, "grid")
    if cfg.n != 2:
        raise _Fail(EXIT_CONFIG, f"{cfg.path}: calibrate runs on T^2, got n = {cfg.n}")
    N = cfg.N[0]
    if N % 4 or N // 4 < 8:
        raise _Fail(EXIT_CONFIG, f"{cfg.path}: calibrate refines N/4, N/2, N and needs N divisible "
                                 f"by 4 with N/4 >= 8, got N = {N}")
    report = calibrate_identities(resolutions=(N // 4, N // 2, N), seed=cfg.seed,
                                  lengths=cfg.lengths, lam=cfg.lam, filter_modes=cfg.filter_modes)
    entry = {"command": "calibrate", "seed": cfg.seed, **report.ledger_entry()}
    _write_json(os.path.join(_out_dir(cfg, args), "convention_ledger.json"), entry)
    if report.winner is None:
        print("calibration inconclusive: " + "; ".join(report.notes))
        return EXIT_INCONCLUSIVE
    print(f"selected {report.winner.label()} (order {report.orders[report.winner.label()]:.2f}, "
          f"nearest rival {report.best_rival_ratio():.1f}x)")
    return EXIT_OK


COMMANDS = {
    "verify": (cmd_verify, ("grid",)),
    "solve-constraints": (cmd_solve_constraints, ("grid", "constraints2d")),
    "evolve": (cmd_evolve, ("grid", "evolution")),
    "calibrate": (cmd_calibrate, ("grid",)),
}


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the configuration code so that 2 stays reserved for verification."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="gerbeflow", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="experiment configuration file")
    parser.add_argument("--state", help="GFLD Cauchy state (evolve only; default flat)")
    parser.add_argument("--out", help="output directory (overrides [io] out)")
    return parser


def _thread_limit():
    raw = os.environ.get("GERBEFLOW_THREADS")
    if raw is None or raw == "":
        return None
    try:
        value = int(raw)
    except ValueError:
        raise _Fail(EXIT_CONFIG, f"GERBEFLOW_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise _Fail(EXIT_CONFIG, f"GERBEFLOW_THREADS must be a positive integer, got {raw!r}")
    return value


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    func, required = COMMANDS[args.command]
    try:
        limit = _thread_limit()
        cfg = load_config(args.config, required=required)
        if limit is None:
            return func(cfg, args)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=limit):
            return func(cfg, args)
    except ConfigError as exc:
        print(f"gerbeflow: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Fail as exc:
        print(f"gerbeflow: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
