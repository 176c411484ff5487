"""Command-line entry point: export, check.

Exit codes mirror the core package: 0 success, 2 usage error
(argparse), 3 anything wrong with the source or exported data.  A run
that completes but exports zero frames also exits 3 -- the summary
still lands on disk for inspection.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from igo_pqa import DataError

from . import __version__
from .errors import ExporterError
from .export import ExportJob, check_export, run_export

SUMMARY_NAME = "export_summary.json"


def cmd_export(args) -> int:
    job = ExportJob(
        dataset=args.dataset,
        root=args.root,
        out=args.out,
        split=args.split,
        limit=args.limit,
    )
    summary = run_export(job, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary.write(out / SUMMARY_NAME)
    print(
        f"{summary.dataset}: {summary.frames_exported} frames "
        f"({summary.cameras_per_frame} cameras each), "
        f"{len(summary.failures)} failed -> {out}"
    )
    for failure in summary.failures:
        print(f"  failed {failure['frame']}: {failure['error']}", file=sys.stderr)
    if summary.frames_exported == 0:
        print("error: no frames exported", file=sys.stderr)
        return 3
    return 0


def cmd_check(args) -> int:
    report = check_export(args.data)
    cameras = ", ".join(str(n) for n in report["cameras_per_frame"]) or "-"
    print(f"{report['frames']} frames ok, cameras per frame: {cameras}")
    for entry in report["errors"]:
        print(f"  bad {entry['frame']}: {entry['error']}", file=sys.stderr)
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 3 if report["errors"] else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pqa-export",
        description="Export driving datasets into the igo-pqa frame layout.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("export", help="convert source frames to frame.json layout")
    p.add_argument("--dataset", required=True, choices=("nuscenes", "waymo"))
    p.add_argument("--root", required=True, help="dataset root directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--split", default="all")
    p.add_argument("--limit", type=int, default=None, help="max frames to export")
    p.add_argument("--jobs", type=int, default=1, help="parallel conversions")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("check", help="reload exported frames and validate them")
    p.add_argument("--data", required=True, help="directory of exported frames")
    p.add_argument("--json", default=None, help="also write the report as JSON")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "export" and args.limit is not None and args.limit < 1:
        parser.error(f"--limit must be >= 1, got {args.limit}")
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ExporterError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
