"""Command-line interface.

    svi run --config conf.json            run the experiment grid, write CSV/JSON
    svi reference --config conf.json --out refs.json
                                          compute reference solutions only
    svi validate --config conf.json       constant audits only

Exit codes: 0 success, 1 validation error, 2 runtime failure.  The
environment variable SVI_THREADS caps cell-level parallelism (defaults to
the logical core count).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import ParameterError, SVIError
from .config import ExperimentConfig
from .runner import run_experiment, validate_config


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    report = run_experiment(config)
    out_dir = Path(args.out or config.output_dir)
    csv_path, json_path = report.write(out_dir)
    for c in report.cells:
        print(f"{c.scheme:>14s}  {c.setting:>6s}  final MSE {c.mse[-1]:.3e}  "
              f"CI [{c.ci_lo[-1]:.3e}, {c.ci_hi[-1]:.3e}]  ({c.wall_time:.1f}s)")
    print(f"wrote {csv_path} and {json_path}")
    return 0


def _cmd_reference(args) -> int:
    from .runner import _build_instance, _compute_reference

    config = ExperimentConfig.from_json(args.config)
    kind = config.problem_kind
    out = {}
    for si, row in enumerate(config.settings):
        inst = _build_instance(kind, row)
        needed = sorted({s.smoothing_kind or "plain" for s in config.schemes})
        for smooth_kind in needed:
            sk = None if smooth_kind == "plain" else smooth_kind
            x_ref, info = _compute_reference(config, kind, row, inst, sk, si)
            out[f"{row['name']}:{smooth_kind}"] = {
                "x": [float(v) for v in x_ref.data], **info}
            print(f"{row['name']:>6s} [{smooth_kind}]  residual {info['residual']:.2e} "
                  f"after {info['iterations']} iterations")
    Path(args.out).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out}")
    return 0


def _cmd_validate(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    rows = validate_config(config)
    ok = True
    for r in rows:
        flags = []
        if "eta_ok" in r:
            flags.append("eta " + ("ok" if r["eta_ok"] else "VIOLATED"))
            flags.append("lip " + ("ok" if r["lip_ok"] else "VIOLATED"))
            ok = ok and r["eta_ok"] and r["lip_ok"]
        print(f"{r['setting']:>6s}  eta={r.get('eta')}  lip={r.get('lip')}  "
              + "  ".join(flags))
    if not ok:
        print("constant audit FAILED", file=sys.stderr)
        return 1
    print("constant audit passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svi",
        description="Benchmark harness for projection-based stochastic "
                    "approximation on monotone problems")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiment grid")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="override the output directory")
    p_run.set_defaults(fn=_cmd_run)
    p_ref = sub.add_parser("reference", help="compute reference solutions")
    p_ref.add_argument("--config", required=True)
    p_ref.add_argument("--out", required=True)
    p_ref.set_defaults(fn=_cmd_reference)
    p_val = sub.add_parser("validate", help="constant audits only")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(fn=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ParameterError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except SVIError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
