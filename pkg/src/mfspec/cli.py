"""Command-line front end: run experiment configs, list built-in measures,
and re-verify stored reports.

Exit codes for ``run``: 0 all bound checks passed, 1 at least one check
failed, 2 the config was rejected, 3 a task refused (analytic
precondition failed) while every completed check passed.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .registry import catalog
from .report import check_report, run

__all__ = ["main"]


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outdir = args.outdir or os.environ.get("MFSPEC_OUTDIR")
    if outdir is not None and args.outdir is None:
        # env var gives the parent; keep per-run subdirectories distinct
        outdir = str(Path(outdir) / cfg.outdir.name)
    result = run(cfg, outdir_override=outdir)
    report = result.report
    if not args.quiet:
        print(f"run '{report['name']}': d={report['dimension']}, "
              f"J={report['set_function']}, levels {report['levels_lo']}..{report['levels_hi']}")
        for key in ("dim_infty", "minkowski", "q_neumann", "q_dirichlet", "h_upper",
                    "alpha_gamma", "bs_slope", "f_upper", "f_lower", "kappa",
                    "eigen_slope", "eigen_gap"):
            if key in report:
                print(f"  {key:<18} {report[key]}")
        for key in sorted(report):
            if key.startswith("refusal_"):
                print(f"  {key}: {report[key]}")
        for key in sorted(report):
            if key.startswith("check_"):
                print(f"  {key:<28} {'pass' if report[key] else 'FAIL'}")
        print(f"  artifacts in {result.outdir}")
    return result.exit_code


def _cmd_catalog(_args: argparse.Namespace) -> int:
    for entry in catalog():
        print(f"{entry.name:<22} d={entry.dimension}  {entry.summary}")
    print()
    print("Custom cascades, densities, and products are described by the "
          "'measure' object of a config file; see the README for the schema.")
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    try:
        agree, recomputed, stored = check_report(args.report)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for key in sorted(recomputed):
        mark = "ok" if stored.get(key) == recomputed[key] else "MISMATCH"
        print(f"{key:<28} stored={stored.get(key)} recomputed={recomputed[key]} [{mark}]")
    if not recomputed:
        print("report contains no recomputable bound checks")
    print("report is consistent" if agree else "report is NOT consistent")
    return 0 if agree else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mfspec",
        description="Dyadic multifractal spectra: partition functions, "
        "adaptive partitions, coarse spectra, and eigenvalue counting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the tasks of a JSON config file")
    p_run.add_argument("config", help="path to the experiment config (JSON)")
    p_run.add_argument("--outdir", help="write artifacts here (overrides config and MFSPEC_OUTDIR)")
    p_run.add_argument("--quiet", action="store_true", help="suppress the stdout summary")
    p_run.set_defaults(func=_cmd_run)

    p_cat = sub.add_parser("catalog", help="list the built-in measures")
    p_cat.set_defaults(func=_cmd_catalog)

    p_chk = sub.add_parser("check", help="recompute the bound checks of a stored report.json")
    p_chk.add_argument("report", help="path to a report.json written by 'mfspec run'")
    p_chk.set_defaults(func=_cmd_check)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
