"""Command-line entry point: ``pof {simulate,tune,sweep,verify-trace,apen}``.

Exit codes: 0 ok, 2 configuration or input error, 3 infeasible tuning,
4 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..channel import TraceError, read_trace_csv
from ..sigproc import AlignmentError
from ..simnet import AttackScenario
from ..verify import InseparableTrainingError, InsufficientSamplesError, PofParams
from .config import ConfigError, ExperimentConfig, TuneSpec, load_config, params_from_json
from .experiments import (SWEEP_KINDS, aggregate_csv, fit_dcorr, run_tuning, simulate, sweep,
                          sweep_csv, trace_apen, verify_traces, write_simulation)

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_RUNTIME = 0, 2, 3, 4


def _config(args) -> ExperimentConfig:
    return load_config(args.config) if args.config else ExperimentConfig()


def _out(args, cfg: ExperimentConfig, default: str) -> Path:
    if args.out:
        return Path(args.out)
    return cfg.output or Path(default)


def _grid(text: str) -> list[float]:
    """``a:b:step`` (inclusive) or a comma list."""
    if ":" in text:
        a, b, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("grid step must be positive")
        n = int(np.floor((b - a) / step + 1e-9))
        return [round(a + i * step, 10) for i in range(n + 1)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _scenario_arg(text: str) -> AttackScenario:
    try:
        d = json.loads(text) if text.lstrip().startswith("{") else {"kind": text}
        return AttackScenario(**d)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _summary_csv(reports) -> str:
    rows = {}
    for r in reports:
        label = r.scenario.get("name") or r.scenario["kind"]
        rows.setdefault(label, []).append(r)
    lines = ["scenario,runs,accepted,rejected,aborted,passing_rate"]
    for label, rs in rows.items():
        acc = sum(r.verdict == "accept" for r in rs)
        rej = sum(r.verdict == "reject" for r in rs)
        lines.append(f"{label},{len(rs)},{acc},{rej},{len(rs) - acc - rej},{acc / len(rs)!r}")
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if args.seed is not None:
        cfg.seeds = [args.seed + s for s in cfg.seeds]
    out = _out(args, cfg, "results")
    params = cfg.params
    if args.params:
        params = params_from_json(args.params)
    elif cfg.tune is not None:
        res, report = run_tuning(cfg)
        params = res.params(N=cfg.params.N, M=cfg.params.M)
        out.mkdir(parents=True, exist_ok=True)
        (out / "tuned.json").write_text(res.to_json() + "\n", encoding="utf-8")
        (out / "tuning_report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    reports = simulate(cfg, params, workers=args.workers)
    write_simulation(reports, out, transcripts=cfg.write_transcripts)
    summary = _summary_csv(reports)
    (out / "summary.csv").write_text(summary, encoding="utf-8")
    sys.stdout.write(summary)
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _config(args)
    if cfg.tune is None:
        cfg.tune = TuneSpec()
    if args.seed is not None:
        cfg.tune = replace(cfg.tune, seed=args.seed)
    res, report = run_tuning(cfg, K_max=args.K_max, strategy=args.strategy)
    out = _out(args, cfg, "tuned")
    out.mkdir(parents=True, exist_ok=True)
    (out / "tuned.json").write_text(res.to_json() + "\n", encoding="utf-8")
    (out / "tuning_report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(res.to_json())
    print(f"held-out F_C={report['heldout_F_C']:.4f} F_M={report['heldout_F_M']:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.params:
        cfg.params = params_from_json(args.params)
    rows = sweep(args.kind, args.grid, cfg, runs=args.runs, seed=args.seed or 0,
                 scenario=args.scenario, protocol=not args.trace_level)
    text = sweep_csv(rows)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.kind == "distance":
        dc = fit_dcorr([r[0] for r in rows], [r[1] for r in rows])
        print(f"fitted d_corr={dc:.2f} m (configured {cfg.world.shadow.d_corr} m)", file=sys.stderr)
    return EXIT_OK


def _load_params(path) -> PofParams:
    return params_from_json(path) if path else PofParams()


def cmd_verify_trace(args) -> int:
    params = _load_params(args.params)
    tv = read_trace_csv(args.trace_v)
    tc = read_trace_csv(args.trace_c)
    d = verify_traces(tv, tc, params)
    print(json.dumps({"verdict": "accept" if d.accept else "reject", **d.to_dict()}, indent=2))
    return EXIT_OK


def cmd_apen(args) -> int:
    tr = read_trace_csv(args.trace)
    print(repr(trace_apen(tr, m=args.m, r_factor=args.r_factor, smooth=args.smooth)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pof", description="Proof-of-following simulation and verification.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--out", help="output directory (file for sweep)")
    common.add_argument("--seed", type=int, help="base seed")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run scenarios x seeds")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--params", help="tuned-parameters JSON (overrides config and tuning)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("tune", parents=[common], help="tune (tau, K, alpha) on labelled pairs")
    p.add_argument("--K-max", dest="K_max", type=int)
    p.add_argument("--strategy", choices=("eer", "gap"))
    p.set_defaults(fn=cmd_tune)

    p = sub.add_parser("sweep", parents=[common], help="one curve as x,mean,std,n")
    p.add_argument("kind", choices=SWEEP_KINDS)
    p.add_argument("--grid", type=_grid, required=True, help="a:b:step or comma list")
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--params", help="tuned-parameters JSON")
    p.add_argument("--scenario", type=_scenario_arg,
                   help="scenario kind or JSON object (K sweep subject, theta far distance)")
    p.add_argument("--trace-level", action="store_true",
                   help="decide on generated traces without running the protocol")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("verify-trace", help="offline decision on two recorded traces")
    p.add_argument("trace_v")
    p.add_argument("trace_c")
    p.add_argument("--params", help="tuned-parameters JSON (default parameters otherwise)")
    p.set_defaults(fn=cmd_verify_trace)

    p = sub.add_parser("apen", help="approximate entropy of a smoothed trace")
    p.add_argument("trace")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--r-factor", dest="r_factor", type=float, default=0.2)
    p.add_argument("--smooth", type=int, default=20, help="moving-average window M")
    p.set_defaults(fn=cmd_apen)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            return args.fn(args)
    except (ConfigError, TraceError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InseparableTrainingError as exc:
        print(f"infeasible tuning: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InsufficientSamplesError, AlignmentError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
