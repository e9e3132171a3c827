"""Command-line entry points: serve, validate, curate, simulate,
compare-schedules, plot-data."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path


def _cmd_serve(args) -> int:
    from .server import ServerConfig, serve

    config = ServerConfig.load(args.config)
    if args.host:
        config.host = args.host
    if args.port is not None:
        config.port = args.port
    if args.workers is not None:
        config.workers = args.workers
    serve(config)
    return 0


def _cmd_validate(args) -> int:
    from .schema import validate_dataset

    failed = False
    for path in args.input:
        report = validate_dataset(path)
        print(f"{path}: total={report.total} invalid={report.invalid}")
        for source in sorted(report.violations):
            for kind, count in sorted(report.violations[source].items()):
                print(f"  {source}: {kind} x{count}")
        failed = failed or report.invalid > 0
    return 1 if failed else 0


def _cmd_curate(args) -> int:
    from .curation import CurationConfig, run_pipeline

    config = CurationConfig.load(args.config) if args.config else CurationConfig()
    if args.input:
        config.inputs = [Path(p) for p in args.input]
    if args.scores:
        config.scores_path = Path(args.scores)
    if args.seed is not None:
        config.seed = args.seed
    if args.out:
        config.out_dir = Path(args.out)
    if args.report:
        config.report_path = Path(args.report)
    out_path, report = run_pipeline(config)
    kept = sum(e["kept"] for e in report.sources.values())
    total = sum(e["input"] for e in report.sources.values())
    print(f"curated {kept}/{total} samples -> {out_path}")
    return 0


def _cmd_simulate(args) -> int:
    from .sim import SimConfig, run_simulation

    config = SimConfig.load(args.config)
    if args.out:
        config.out_dir = Path(args.out)
    trajectory = run_simulation(config)
    print(f"trajectory -> {trajectory}")
    return 0


def _cmd_compare_schedules(args) -> int:
    from .sim import SimConfig, compare_schedules

    config = SimConfig.load(args.config)
    if args.out:
        config.out_dir = Path(args.out)
    report_path, csv_path = compare_schedules(config)
    print(f"report -> {report_path}")
    print(f"curves -> {csv_path}")
    return 0


def _cmd_plot_data(args) -> int:
    """Flatten a metrics JSONL export into per-source CSV curve data."""
    rows = []
    with open(args.metrics, encoding="utf-8") as fh:
        for line in fh:
            record = json.loads(line)
            if record.get("kind") == "header":
                continue
            rows.append(record)
    if not rows:
        print("no metric rows found", file=sys.stderr)
        return 1
    fields = ["step", "data_source"] + sorted(
        {k for row in rows for k in row if k not in ("step", "data_source", "iou_pass_rate")}
    )
    iou_keys = sorted({t for row in rows for t in (row.get("iou_pass_rate") or {})})
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields + [f"iou_pass_rate@{t}" for t in iou_keys])
        for row in rows:
            values = [row.get(f) for f in fields]
            values += [(row.get("iou_pass_rate") or {}).get(t) for t in iou_keys]
            writer.writerow(values)
    print(f"plot data -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unireward")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the reward server")
    p.add_argument("--config", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("validate", help="validate dataset files")
    p.add_argument("--input", nargs="+", required=True)
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("curate", help="run the curation pipeline")
    p.add_argument("--input", nargs="*", default=None)
    p.add_argument("--scores", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--report", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(fn=_cmd_curate)

    p = sub.add_parser("simulate", help="run the training-loop simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("compare-schedules", help="paired-seed threshold schedule comparison")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_compare_schedules)

    p = sub.add_parser("plot-data", help="metrics JSONL to CSV curve data")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_plot_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
