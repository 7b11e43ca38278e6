"""Command line surface: pita scan | patch | report | serve.

Exit codes: 0 success (detections are data, not failures), 2 input
errors (unreadable file, bad catalog), 3 pattern not detected on the
page being patched.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings as _warnings
from datetime import date, datetime
from pathlib import Path

from .catalog import (
    Catalog,
    CatalogSyntaxError,
    CatalogValidationError,
    load_catalog_path,
    load_seed_catalog,
)
from .detector import scan, scan_report
from .document import DocumentError, parse_html, serialize
from .gateway import GatewayApp, GatewayConfig, GatewayServer
from .patch import apply_profile
from .profiles import CorruptProfileError, ProfileStore, profile_path_from_env
from .telemetry import aggregate, daily_matrix, read_log_dir

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_DETECTED = 3


def _fail(message: str) -> int:
    print(f"pita: {message}", file=sys.stderr)
    return EXIT_INPUT


def _load_catalog(path_arg: str | None) -> Catalog:
    path = path_arg or os.environ.get("PITA_CATALOG")
    if path:
        return load_catalog_path(path)
    return load_seed_catalog()


def _html_inputs(paths: list[str]) -> list[Path]:
    out: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            out.extend(sorted(path.glob("*.html")))
        else:
            out.append(path)
    return out


def cmd_scan(args: argparse.Namespace) -> int:
    try:
        catalog = _load_catalog(args.catalog)
    except (OSError, CatalogSyntaxError, CatalogValidationError) as exc:
        return _fail(f"cannot load catalog: {exc}")
    files = _html_inputs(args.paths)
    if not files:
        return _fail("no input files")
    for path in files:
        try:
            document = parse_html(path.read_bytes(), str(path))
        except (OSError, DocumentError) as exc:
            return _fail(f"cannot read {path}: {exc}")
        detections = scan(document, catalog, args.site)
        report = scan_report(detections, catalog, site=args.site, source=str(path))
        if args.format == "json":
            print(json.dumps(report.to_json(), indent=2))
        else:
            print(f"== {path}")
            print(report.to_text())
    return EXIT_OK


def cmd_patch(args: argparse.Namespace) -> int:
    try:
        catalog = _load_catalog(args.catalog)
    except (OSError, CatalogSyntaxError, CatalogValidationError) as exc:
        return _fail(f"cannot load catalog: {exc}")
    path = Path(args.file)
    try:
        document = parse_html(path.read_bytes(), str(path))
    except (OSError, DocumentError) as exc:
        return _fail(f"cannot read {path}: {exc}")

    if args.profile is not None:
        if not args.site:
            return _fail("--profile requires --site")
        store = ProfileStore(profile_path_from_env(args.profile))
        try:
            with _warnings.catch_warnings():
                _warnings.simplefilter("ignore")
                profile = store.load(catalog)
        except CorruptProfileError as exc:
            print(f"pita: warning: {exc}; continuing with empty profile", file=sys.stderr)
            profile = exc.recovered
        selections = profile.pairs_for_site(args.site)
        site = args.site
    else:
        if not args.pattern or not args.enhancement:
            return _fail("need --pattern and --enhancement (or --profile)")
        pattern = catalog.patterns.get(args.pattern)
        if pattern is None:
            return _fail(f"unknown pattern {args.pattern!r}")
        enhancement = catalog.enhancements.get(args.enhancement)
        if enhancement is None or enhancement.pattern_id != pattern.id:
            return _fail(f"{args.enhancement!r} is not an enhancement of {args.pattern!r}")
        selections = [(pattern.id, enhancement.id)]
        site = args.site or pattern.site

    result = apply_profile(document, catalog, selections, site)
    for warning in result.warnings:
        print(f"pita: warning: {warning}", file=sys.stderr)
    if args.profile is None and not result.receipts:
        print(f"pita: pattern {args.pattern!r} not detected on {path}", file=sys.stderr)
        return EXIT_NOT_DETECTED

    out_path = Path(args.out) if args.out else path.with_suffix(".patched.html")
    out_path.write_text(serialize(result.document), "utf-8")
    print(f"wrote {out_path} ({len(result.receipts)} patch(es))")
    if args.emit_receipt:
        receipts = [receipt.to_json() for receipt in result.receipts]
        Path(args.emit_receipt).write_text(json.dumps(receipts, indent=2), "utf-8")
        print(f"wrote {args.emit_receipt}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    directory = Path(args.log_dir)
    if not directory.is_dir():
        return _fail(f"{directory} is not a directory")
    loaded = read_log_dir(directory)
    if loaded.skipped:
        print(f"pita: warning: skipped {loaded.skipped} malformed line(s)", file=sys.stderr)
    stats = aggregate(loaded.events, loaded.notes)

    if args.start:
        start_day = date.fromisoformat(args.start)
    else:
        stamps = [e.timestamp for e in loaded.events] + [n.timestamp for n in loaded.notes]
        start_day = min(stamps).date() if stamps else date.today()
    matrix = daily_matrix(loaded.events, loaded.notes, start_day, args.days)

    if args.format == "json":
        print(json.dumps({"stats": stats.to_json(), "matrix": matrix.to_json()}, indent=2))
        return EXIT_OK
    print(f"participants: {stats.participants}")
    header = f"{'metric':<22}{'total':>8}{'mean':>10}{'std':>10}{'min':>6}{'max':>6}"
    print(header)
    for name in (
        "log_entries", "diary_entries", "distinct_pages",
        "probe_triggers", "enhancements_set_up", "enhancement_triggers",
    ):
        m = getattr(stats, name)
        print(f"{name:<22}{m.total:>8}{m.mean:>10.2f}{m.std:>10.2f}{m.min:>6}{m.max:>6}")
    print()
    print(matrix.to_text())
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        catalog = _load_catalog(args.catalog)
    except (OSError, CatalogSyntaxError, CatalogValidationError) as exc:
        return _fail(f"cannot load catalog: {exc}")
    config = GatewayConfig(
        catalog=catalog,
        profile_path=profile_path_from_env(args.profile),
        log_dir=Path(args.log_dir),
        consent=args.consent,
    )
    server = GatewayServer(GatewayApp(config), port=args.port)
    print(f"pita: serving on http://127.0.0.1:{server.port}/v1/message", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pita", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_scan = sub.add_parser("scan", help="detect dark patterns in HTML files")
    p_scan.add_argument("paths", nargs="+", help="HTML files or directories")
    p_scan.add_argument("--site", required=True, help="site key, e.g. amazon")
    p_scan.add_argument("--catalog", help="catalog JSON path (default: bundled seed)")
    p_scan.add_argument("--format", choices=("text", "json"), default="text")
    p_scan.set_defaults(func=cmd_scan)

    p_patch = sub.add_parser("patch", help="apply enhancements to an HTML file")
    p_patch.add_argument("file", help="HTML file to patch")
    p_patch.add_argument("--pattern", help="pattern id to patch")
    p_patch.add_argument("--enhancement", help="enhancement id to apply")
    p_patch.add_argument("--profile", nargs="?", const="", default=None,
                         help="apply saved selections (optional path; env PITA_PROFILE)")
    p_patch.add_argument("--site", help="site key (required with --profile)")
    p_patch.add_argument("--out", help="output path (default: <file>.patched.html)")
    p_patch.add_argument("--emit-receipt", help="write patch receipts JSON here")
    p_patch.add_argument("--catalog", help="catalog JSON path (default: bundled seed)")
    p_patch.set_defaults(func=cmd_patch)

    p_report = sub.add_parser("report", help="engagement stats from JSONL logs")
    p_report.add_argument("log_dir", help="directory of events/notes JSONL files")
    p_report.add_argument("--days", type=int, default=14)
    p_report.add_argument("--start", help="matrix start day YYYY-MM-DD (default: first record)")
    p_report.add_argument("--format", choices=("text", "json"), default="text")
    p_report.set_defaults(func=cmd_report)

    p_serve = sub.add_parser("serve", help="run the local panel-UI service")
    p_serve.add_argument("--port", type=int, default=8943)
    p_serve.add_argument("--catalog", help="catalog JSON path (default: bundled seed)")
    p_serve.add_argument("--profile", help="profile JSON path (env PITA_PROFILE)")
    p_serve.add_argument("--log-dir", default="pita-logs", help="telemetry sink directory")
    p_serve.add_argument("--consent", action="store_true", help="enable telemetry recording")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
