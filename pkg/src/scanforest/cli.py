"""Command-line entry point: ``scanforest {generate,preprocess,detect,benchmark}``.

Exit codes: 0 success, 1 usage error, 2 data or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from scanforest.evalharness import METHODS, compute_metrics, method_ip_scores, run_benchmark
from scanforest.isoforest import InsufficientDataError, SchemaError
from scanforest.preprocess import flatten, summarize, write_table
from scanforest.scan_model import DataError, build_catalog, read_labels, read_scans, write_labels, write_scans
from scanforest.siforest import SiForestConfig, n_flagged, top_k
from scanforest.synthgen import (
    ConfigError,
    GenerationError,
    GeneratorConfig,
    generate_experiment,
    load_config,
)

_DEFAULT_GEN = GeneratorConfig()


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_generator_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-ips", type=int, default=_DEFAULT_GEN.n_ips, help="number of distinct IPs")
    p.add_argument("--scans-per-ip", type=float, default=_DEFAULT_GEN.scans_per_ip, help="mean scan records per IP")
    p.add_argument("--anomaly-rate", type=float, default=_DEFAULT_GEN.anomaly_rate, help="fraction of IPs planted as anomalous")
    p.add_argument("--spike-factor", type=int, default=_DEFAULT_GEN.type1_spike_factor, help="type-1 volume multiplier")
    p.add_argument("--mismatch-pairs", type=int, default=_DEFAULT_GEN.type2_mismatch_pairs, help="type-2 mismatched pairs per IP")
    p.add_argument("--config", type=Path, default=None, help="key=value generator config file; explicit flags override it")


def _add_forest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--aggregation", choices=("extreme", "mean"), default="extreme", help="per-IP score pooling")
    p.add_argument("--trees", type=int, default=100, help="trees per forest")
    p.add_argument("--subsample", type=int, default=256, help="rows drawn per tree")
    p.add_argument("--jobs", type=int, default=1, help="threads for tree fitting (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="scanforest", description=__doc__.splitlines()[0], formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", metavar="{generate,preprocess,detect,benchmark}", parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic scan dataset and its labels", formatter_class=fmt)
    g.add_argument("--anomaly-type", type=int, choices=(1, 2), required=True, help="planted anomaly type")
    _add_generator_flags(g)
    g.add_argument("--seed", type=int, default=_DEFAULT_GEN.seed, help="generator seed")
    g.add_argument("--out", type=Path, required=True, help="scan JSONL output")
    g.add_argument("--labels", type=Path, default=None, help="labels CSV output")

    pp = sub.add_parser("preprocess", help="flatten or summarize a scan file to CSV", formatter_class=fmt)
    pp.add_argument("--in", dest="inp", type=Path, required=True, help="scan JSONL input")
    pp.add_argument("--out", type=Path, required=True, help="CSV output")
    pp.add_argument("--table", choices=("flat", "summary"), default="flat", help="which representation to write")

    d = sub.add_parser("detect", help="flag the most anomalous IPs of a scan file", formatter_class=fmt)
    d.add_argument("--method", choices=METHODS, default="siforest", help="detection method")
    d.add_argument("--in", dest="inp", type=Path, required=True, help="scan JSONL input")
    d.add_argument("--contamination", type=float, default=_DEFAULT_GEN.anomaly_rate, help="fraction of IPs to flag")
    d.add_argument("--seed", type=int, default=0, help="forest seed")
    _add_forest_flags(d)
    d.add_argument("--out", type=Path, required=True, help="flags CSV output (ip,score)")
    d.add_argument("--labels", type=Path, default=None, help="optional labels CSV; prints precision/recall/F2")

    b = sub.add_parser("benchmark", help="compare all methods over seeded repeats", formatter_class=fmt)
    b.add_argument("--anomaly-type", type=int, choices=(1, 2), default=None, help="run one type only (default: both)")
    _add_generator_flags(b)
    b.add_argument("--seed", type=int, default=_DEFAULT_GEN.seed, help="base seed; repeat i uses seed+i")
    b.add_argument("--repeats", type=int, default=10, help="datasets per anomaly type")
    b.add_argument("--contamination", type=float, default=None, help="fraction of IPs to flag (default: anomaly rate)")
    _add_forest_flags(b)
    b.add_argument("--out", type=Path, required=True, help="JSON report output")
    b.add_argument("--csv", type=Path, default=None, help="flat per-run CSV output")
    b.add_argument("--plot-data", type=Path, default=None, help="per-IP score histogram CSV output")
    return parser


def _generator_config(args) -> GeneratorConfig:
    flags = {
        "n_ips": args.n_ips,
        "scans_per_ip": args.scans_per_ip,
        "anomaly_rate": args.anomaly_rate,
        "type1_spike_factor": args.spike_factor,
        "type2_mismatch_pairs": args.mismatch_pairs,
        "seed": args.seed,
    }
    if args.config is None:
        return GeneratorConfig(**flags)
    # only flags the user actually changed override the file
    explicit = {k: v for k, v in flags.items() if v != getattr(_DEFAULT_GEN, k)}
    return load_config(args.config, **explicit)


def _forest_config(args) -> SiForestConfig:
    cfg = SiForestConfig(n_trees=args.trees, subsample_size=args.subsample, seed=args.seed, aggregation=args.aggregation)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError("forest", str(exc)) from None
    return cfg


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def cmd_generate(args) -> None:
    cfg = _generator_config(args)
    ds, truth = generate_experiment(args.anomaly_type, cfg)
    write_scans(ds, args.out)
    if args.labels is not None:
        write_labels(truth, args.labels)
    print(f"wrote {len(ds)} records for {len(truth)} IPs to {args.out}", file=sys.stderr)


def cmd_preprocess(args) -> None:
    ds = read_scans(args.inp)
    table = flatten(ds, build_catalog(ds)) if args.table == "flat" else summarize(ds)
    write_table(table, args.out)


def cmd_detect(args) -> None:
    if not 0 < args.contamination < 1:
        _bad_contamination(args.contamination)
    ds = read_scans(args.inp)
    truth = read_labels(args.labels) if args.labels is not None else None
    scores = method_ip_scores(args.method, ds, _forest_config(args), n_jobs=args.jobs)
    flagged = top_k(scores, n_flagged(args.contamination, len(scores)))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ip", "score"])
    w.writerows((ip, repr(s)) for ip, s in flagged)
    _write(args.out, buf.getvalue())
    if truth is not None:
        m = compute_metrics((ip for ip, _ in flagged), truth)
        print(f"precision={m.precision:.4f} recall={m.recall:.4f} f2={m.f2:.4f}")


def _bad_contamination(value):
    raise ConfigError("contamination", f"must lie in (0, 1), got {value}")


def cmd_benchmark(args) -> None:
    if args.repeats < 1:
        raise ConfigError("repeats", f"must be >= 1, got {args.repeats}")
    if args.contamination is not None and not 0 < args.contamination < 1:
        _bad_contamination(args.contamination)
    types = (args.anomaly_type,) if args.anomaly_type else (1, 2)
    report = run_benchmark(
        types,
        n_repeats=args.repeats,
        base_cfg=_generator_config(args),
        forest_cfg=_forest_config(args),
        contamination=args.contamination,
        n_jobs=args.jobs,
        keep_scores=args.plot_data is not None,
    )
    _write(args.out, report.to_json())
    if args.csv is not None:
        _write(args.csv, report.to_csv())
    if args.plot_data is not None:
        _write(args.plot_data, report.histogram_csv())
    for t in report.anomaly_types:
        for m in METHODS:
            mean = report.cells[t][m].mean
            print(f"type {t} {m:16s} P={mean['precision']:.3f} R={mean['recall']:.3f} F2={mean['f2']:.3f}")


COMMANDS = {
    "generate": cmd_generate,
    "preprocess": cmd_preprocess,
    "detect": cmd_detect,
    "benchmark": cmd_benchmark,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("scanforest: a subcommand is required (generate, preprocess, detect, benchmark)")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: cannot read {exc.filename}: no such file", file=sys.stderr)
        return 2
    except (DataError, ConfigError, GenerationError, InsufficientDataError, SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
