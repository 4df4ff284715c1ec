"""Command-line entry points.

Verbs: simulate | sensitivity | optimize-gain | optimize-zero-path | audit.
Every run writes its artifacts into one output directory: the resolved
configuration echo, CSV data files, and a machine-readable summary.json with
self-describing keys. Identical manifest plus seed reproduces byte-identical
summaries.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import engine, linkage, optimize
from .config import Config
from .control import ControllerConfig
from .errors import (BranchJump, BudgetExhausted, ConfigError, MorphwingError,
                     NoConvergence, ParseError, SimDiverged, TooShort)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_NO_CONVERGENCE = 4
EXIT_DIVERGED = 5
EXIT_BUDGET = 6
EXIT_OTHER = 7

_EXIT_CODES = [
    (ParseError, EXIT_PARSE),
    (ConfigError, EXIT_CONFIG),
    (NoConvergence, EXIT_NO_CONVERGENCE),
    (BranchJump, EXIT_NO_CONVERGENCE),
    (SimDiverged, EXIT_DIVERGED),
    (TooShort, EXIT_DIVERGED),
    (BudgetExhausted, EXIT_BUDGET),
    (MorphwingError, EXIT_OTHER),
]


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _write_summary(out_dir: str, payload: dict):
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _load(args) -> Config:
    cfg = Config.load(args.config) if args.config else Config.default()
    if args.set:
        cfg = cfg.apply_overrides(args.set)
    return cfg


def _prepare_out(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _prepare_out(args)
    cfg.save(os.path.join(out, "resolved_config.yaml"))
    traj, _ = engine.run_episode(cfg)
    traj.write_csv(os.path.join(out, "trajectory.csv"))
    traj.write_binary(os.path.join(out, "trajectory.bin"))
    engine.write_plot_data(traj, out)
    if args.strip_log:
        from .aero import write_strip_csv
        write_strip_csv(cfg, traj, os.path.join(out, "strips.csv"))
    audit = engine.energy_audit(traj)
    residuals = engine.closure_residuals(cfg, traj)
    try:
        lc = engine.detect_limit_cycle(traj)
        lc_payload = {"detected": lc.detected, "period_s": lc.period,
                      "transient_end_s": lc.transient_end,
                      "crossings": len(lc.crossing_times)}
    except TooShort:
        lc_payload = {"detected": False, "period_s": None,
                      "transient_end_s": None, "crossings": 0,
                      "note": "trajectory shorter than 10 crank periods"}
    _write_summary(out, {
        "command": "simulate",
        "seed": args.seed,
        "status": traj.status,
        "steps": traj.steps_done,
        "duration_s": cfg.duration,
        "final_pitch_rad": float(traj.pitch()[-1]),
        "final_position_m": [float(v) for v in
                             (traj.col("px")[-1], traj.col("py")[-1],
                              traj.col("pz")[-1])],
        "energy_audit_max_closure_error": audit.max_closure_error,
        "max_loop_residual_m": float(np.max(residuals)),
        "limit_cycle": lc_payload,
    })
    if traj.status != "ok":
        print(f"simulate: {traj.status} after {traj.steps_done} steps",
              file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    cfg = _load(args)
    out = _prepare_out(args)
    cfg.save(os.path.join(out, "resolved_config.yaml"))
    topo = linkage.LinkageTopology.from_config(cfg)
    params = args.parameters.split(",") if args.parameters else \
        ["l_3b", "l_3c", "l_8b", "l_10b"]
    reports = [linkage.sensitivity_analysis(topo, p, args.delta,
                                            n_samples=args.samples)
               for p in params]
    linkage.write_sensitivity_csv(os.path.join(out, "sensitivity.csv"), reports)
    _write_summary(out, {
        "command": "sensitivity",
        "seed": args.seed,
        "delta_m": args.delta,
        "reports": [{"parameter": r.parameter,
                     "max_dev_j5_m": r.max_dev_j5,
                     "rms_dev_j5_m": r.rms_dev_j5,
                     "max_dev_j16_m": r.max_dev_j16,
                     "rms_dev_j16_m": r.rms_dev_j16} for r in reports],
    })
    return EXIT_OK


def _write_trace(out: str, result: optimize.OptimizationResult):
    with open(os.path.join(out, "trace.csv"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["evaluation", "cost"])
        for i, c in result.trace:
            w.writerow([i, repr(float(c))])


def _cmd_optimize(args, kind: str) -> int:
    cfg = _load(args)
    out = _prepare_out(args)
    cfg.save(os.path.join(out, "resolved_config.yaml"))
    budget = args.budget if args.budget is not None else None
    if kind == "gain":
        result = optimize.optimize_pitch_gain(cfg, budget=budget, seed=args.seed)
        baseline, _ = optimize.evaluate_cost(
            cfg, pitch_gain=np.zeros(4))
        scale = float(cfg.data["control"]["pitch_gain_unit_scale"])
        best_print = [float(v) / scale for v in result.best_x]
        payload_key = "pitch_gain"
    else:
        result = optimize.optimize_zero_path(cfg, budget=budget, seed=args.seed)
        baseline, _ = optimize.evaluate_cost(
            cfg, zero_path=np.array(cfg.data["control"]["zero_path_lengths_m"]),
            pitch_on=False)
        best_print = [float(v) for v in result.best_x]
        payload_key = "zero_path_lengths_m"
    effective_budget = (budget if budget is not None
                        else cfg.data["optimizer"]["budget"])
    _write_trace(out, result)
    _write_summary(out, {
        "command": f"optimize-{kind}",
        "seed": args.seed,
        "budget": effective_budget,
        "method": cfg.data["optimizer"]["method"],
        payload_key: best_print,
        "best_cost": result.best_cost,
        "baseline_cost": baseline,
        "evaluations": result.evaluations,
        "converged": result.converged,
        "diverged_evaluations": result.diverged_evals,
    })
    if not result.converged and result.evaluations >= max(effective_budget, 1):
        print("optimizer: budget exhausted; best-so-far reported",
              file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_audit(args) -> int:
    cfg = _load(args)
    out = _prepare_out(args)
    cfg.save(os.path.join(out, "resolved_config.yaml"))
    traj, _ = engine.run_episode(cfg)
    audit = engine.energy_audit(traj)
    residuals = engine.closure_residuals(cfg, traj)
    engine.write_plot_data(traj, out)
    with open(os.path.join(out, "energy_audit.csv"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "E_kin", "U_spring", "U_grav", "work_drive",
                    "work_damper", "work_aero", "closure"])
        for i in range(len(audit.t)):
            w.writerow([repr(float(audit.t[i])), repr(float(audit.kinetic[i])),
                        repr(float(audit.spring[i])), repr(float(audit.gravity[i])),
                        repr(float(audit.work_drive[i])),
                        repr(float(audit.work_damper[i])),
                        repr(float(audit.work_aero[i])),
                        repr(float(audit.closure[i]))])
    _write_summary(out, {
        "command": "audit",
        "seed": args.seed,
        "status": traj.status,
        "energy_audit_max_closure_error": audit.max_closure_error,
        "max_loop_residual_m": float(np.max(residuals)),
        "final_energy_j": float(audit.kinetic[-1] + audit.spring[-1]
                                + audit.gravity[-1]),
    })
    return EXIT_OK if traj.status == "ok" else EXIT_DIVERGED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="morphwing",
        description="Morphing-wing flapping-flight simulator and gain tuner")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="YAML config path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="PRNG seed")
        p.add_argument("--set", action="append", default=[],
                       metavar="KEY=VALUE", help="config override (repeatable)")

    p = sub.add_parser("simulate", help="run one episode and export logs")
    common(p)
    p.add_argument("--strip-log", action="store_true",
                   help="also export the per-strip aero debug CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sensitivity", help="linkage parameter sensitivity sweep")
    common(p)
    p.add_argument("--parameters", default=None,
                   help="comma-separated parameter names (default: the four FDCs)")
    p.add_argument("--delta", type=float, default=5e-4,
                   help="perturbation in meters")
    p.add_argument("--samples", type=int, default=180,
                   help="crank samples per revolution")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("optimize-gain", help="search the pitch gain matrix")
    common(p)
    p.add_argument("--budget", type=int, default=None)
    p.set_defaults(func=lambda a: _cmd_optimize(a, "gain"))

    p = sub.add_parser("optimize-zero-path",
                       help="search the zero-path FDC lengths")
    common(p)
    p.add_argument("--budget", type=int, default=None)
    p.set_defaults(func=lambda a: _cmd_optimize(a, "zero-path"))

    p = sub.add_parser("audit", help="run one episode and verify energy books")
    common(p)
    p.set_defaults(func=cmd_audit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MorphwingError as exc:
        for etype, code in _EXIT_CODES:
            if isinstance(exc, etype):
                print(f"error: {exc}", file=sys.stderr)
                return code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
