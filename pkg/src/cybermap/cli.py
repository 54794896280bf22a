"""Command-line entry point: validate, querygen, fetch, analyze, audit.

Exit codes: 0 success, 1 domain-level findings (violations, partial
results), 2 usage, configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional, Sequence, TextIO

from . import __version__
from .analysis import MissingMeasurements, ReportOptions, build_report
from .measure import (
    ConfigurationError,
    FixtureProvider,
    LiveConfig,
    LiveProvider,
    MeasurementSet,
    PacingPolicy,
    fetch_plan,
    fixture_text,
    read_fixture,
)
from .querygen import IndicatorKind, QueryOptions, parse_indicators, plan_to_csv, query_plan
from .report import (
    audit_to_csv,
    audit_to_json,
    audit_to_text,
    report_to_json,
    report_to_text,
    rows_to_csv,
)
from .taxonomy import RegistryFormatError, load_registry, syntax_audit, validate_registry
from .webunits import SuffixRules

EXIT_OK, EXIT_FINDINGS, EXIT_USAGE = 0, 1, 2
CONFIG_ENV = "CYBERMAP_CONFIG"
FORMATS = ("table", "csv", "json")

log = logging.getLogger("cybermap")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    registry: Optional[str] = None
    measurements: list[str] = field(default_factory=list)
    provider: str = "fixture"
    indicators: list[IndicatorKind] = field(
        default_factory=lambda: [IndicatorKind.COUNT_PAGE, IndicatorKind.URL_MENTION]
    )
    format: str = "table"
    top_k: int = 25
    include_external_aliases: bool = False
    allow_partial: bool = False
    legacy_table6: bool = False
    legacy_linkdomain: bool = False
    reference: Optional[str] = None
    suffixes: Optional[str] = None
    output: Optional[str] = None
    timestamps: bool = False
    workers: int = 1
    live: dict = field(default_factory=dict)

    def check(self) -> None:
        if self.format not in FORMATS:
            raise UsageError(f"--format must be one of {', '.join(FORMATS)}")
        if self.provider not in ("fixture", "live"):
            raise UsageError("--provider must be 'fixture' or 'live'")
        if self.top_k < 0:
            raise UsageError("--top-k must be non-negative")

    @property
    def query_options(self) -> QueryOptions:
        return QueryOptions(self.legacy_table6, self.legacy_linkdomain)


_BOOL_KEYS = ("include_external_aliases", "allow_partial", "legacy_table6", "legacy_linkdomain", "timestamps")


def load_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    """Hard defaults, then the JSON file named by CYBERMAP_CONFIG/--config, then flags."""
    cfg = RunConfig()
    path = args.config or environ.get(CONFIG_ENV)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"config {path}: {exc}") from exc
        for key, value in data.items():
            key = key.replace("-", "_")
            if key == "indicators":
                value = parse_indicators(",".join(value) if isinstance(value, list) else value)
            elif key == "measurements" and isinstance(value, str):
                value = [value]
            if not hasattr(cfg, key):
                raise UsageError(f"config {path}: unknown setting {key!r}")
            setattr(cfg, key, value)

    for key in ("registry", "provider", "format", "top_k", "reference", "suffixes", "output", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "measurements", None):
        cfg.measurements = list(args.measurements)
    if getattr(args, "indicators", None):
        try:
            cfg.indicators = parse_indicators(args.indicators)
        except ValueError as exc:
            raise UsageError(f"--indicators: {exc}") from exc
    for key in _BOOL_KEYS:
        if getattr(args, key, False):
            setattr(cfg, key, True)
    if getattr(args, "live_config", None):
        try:
            with open(args.live_config, encoding="utf-8") as fh:
                cfg.live = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"live config {args.live_config}: {exc}") from exc
    cfg.check()
    return cfg


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--registry", help="registry JSON file")
    g.add_argument("--measurements", action="append", metavar="CSV", help="fixture CSV (repeatable)")
    g.add_argument("--provider", choices=("fixture", "live"))
    g.add_argument("--format", choices=FORMATS)
    g.add_argument("--top-k", type=int, dest="top_k")
    g.add_argument("--indicators", help="comma list: count_page,url_mention,hypertextual_citation,textual_citation")
    g.add_argument("--allow-partial", action="store_true", dest="allow_partial")
    g.add_argument("--include-external-aliases", action="store_true", dest="include_external_aliases")
    g.add_argument("--legacy-table6", action="store_true", dest="legacy_table6",
                   help="satellite unit size queries as 'site:http://X -site:platform'")
    g.add_argument("--legacy-linkdomain", action="store_true", dest="legacy_linkdomain",
                   help="directory-level linkdomain targets as 'http://www.host/dir'")
    g.add_argument("--reference", help="JSON of published values to check the report against")
    g.add_argument("--suffixes", help="extra multi-label public suffixes, one per line")
    g.add_argument("--output", "-o", help="write to this file instead of standard output")
    g.add_argument("--timestamps", action="store_true", help="include generation time in machine output")
    g.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    g.add_argument("--live-config", dest="live_config", help="JSON live-provider settings")
    g.add_argument("--workers", type=int, help="parallel hosts during fetch")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="cybermap", description="Multilevel university web-presence analysis.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("validate", "check a registry file; prints one violation per line"),
        ("querygen", "emit the measurement query plan as CSV"),
        ("fetch", "resolve the plan through a provider; emits a fixture CSV"),
        ("analyze", "build the analysis report"),
        ("audit", "URL syntax audit of the core internal units"),
    ):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("registry_path", nargs="?", help="registry JSON (same as --registry)")
    return parser


def _registry(cfg: RunConfig, args):
    path = getattr(args, "registry_path", None) or cfg.registry
    if not path:
        raise UsageError("no registry given (--registry)")
    try:
        return load_registry(path)
    except RegistryFormatError as exc:
        raise UsageError(str(exc)) from exc


def _suffix_rules(cfg: RunConfig) -> SuffixRules:
    rules = SuffixRules.default()
    if cfg.suffixes:
        try:
            rules = rules.extended(SuffixRules.from_file(cfg.suffixes).suffixes)
        except OSError as exc:
            raise UsageError(f"--suffixes: {exc}") from exc
    return rules


def _measurements(cfg: RunConfig) -> MeasurementSet:
    if not cfg.measurements:
        raise UsageError("the fixture provider needs --measurements")
    mset = MeasurementSet()
    try:
        for path in cfg.measurements:
            mset = mset.merged(read_fixture(path))
    except (ConfigurationError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    return mset


def _write(cfg: RunConfig, text: str, stdout: TextIO) -> None:
    if cfg.output:
        try:
            with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"--output: {exc}") from exc
    else:
        stdout.write(text)


def _print_violations(violations, stream: TextIO) -> None:
    for v in violations:
        stream.write(f"{v}\n")


def cmd_validate(cfg: RunConfig, args, stdout: TextIO, stderr: TextIO) -> int:
    violations = validate_registry(_registry(cfg, args))
    _print_violations(violations, stdout)
    return EXIT_FINDINGS if violations else EXIT_OK


def cmd_querygen(cfg: RunConfig, args, stdout: TextIO, stderr: TextIO) -> int:
    registry = _registry(cfg, args)
    violations = validate_registry(registry)
    if violations:
        _print_violations(violations, stderr)
        return EXIT_FINDINGS
    plan = query_plan(registry, cfg.indicators, cfg.query_options)
    deprecated = sum(1 for pq in plan if pq.query.deprecated_operator)
    if deprecated:
        stderr.write(f"deprecated_operator: {deprecated} linkdomain queries; most engines no longer support them\n")
    _write(cfg, plan_to_csv(plan), stdout)
    return EXIT_OK


def cmd_fetch(cfg: RunConfig, args, stdout: TextIO, stderr: TextIO) -> int:
    registry = _registry(cfg, args)
    violations = validate_registry(registry)
    if violations:
        _print_violations(violations, stderr)
        return EXIT_FINDINGS
    plan = query_plan(registry, cfg.indicators, cfg.query_options)
    if cfg.provider == "fixture":
        provider = FixtureProvider(_measurements(cfg))
        policy = PacingPolicy(min_interval=0.0)
    else:
        try:
            live = LiveConfig.from_dict(cfg.live)
            provider = LiveProvider(live)
        except (ConfigurationError, TypeError) as exc:
            raise UsageError(str(exc)) from exc
        policy = PacingPolicy.from_config(live)
    result = fetch_plan(plan, provider, policy, max_workers=cfg.workers)
    _write(cfg, fixture_text(result), stdout)
    for failure in result.errors:
        stderr.write(f"{failure}\n")
    return EXIT_FINDINGS if result.errors else EXIT_OK


def _reference(cfg: RunConfig) -> dict:
    if not cfg.reference:
        return {}
    try:
        with open(cfg.reference, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"--reference: {exc}") from exc
    return data.get("values", data)


def cmd_analyze(cfg: RunConfig, args, stdout: TextIO, stderr: TextIO) -> int:
    registry = _registry(cfg, args)
    violations = validate_registry(registry)
    if violations:
        _print_violations(violations, stderr)
        return EXIT_FINDINGS
    if cfg.provider != "fixture":
        raise UsageError("analyze reads recorded measurements; run 'fetch' first for live counts")
    mset = _measurements(cfg)
    options = ReportOptions(
        top_k=cfg.top_k,
        include_external_aliases=cfg.include_external_aliases,
        allow_partial=cfg.allow_partial,
        query_options=cfg.query_options,
        reference=_reference(cfg),
    )
    try:
        report = build_report(registry, mset, options)
    except MissingMeasurements as exc:
        for qid, rendered in exc.missing:
            stderr.write(f"missing_fixture\t{qid}\t{rendered}\n")
        stderr.write(f"{len(exc.missing)} measurement(s) missing; rerun with --allow-partial for a partial report\n")
        return EXIT_USAGE

    stamp = datetime.now(timezone.utc).replace(microsecond=0).isoformat() if cfg.timestamps else None
    if cfg.format == "json":
        text = report_to_json(report, stamp)
    elif cfg.format == "csv":
        text = rows_to_csv(report.rows)
    else:
        text = report_to_text(report)
    _write(cfg, text, stdout)
    return EXIT_FINDINGS if report.partial else EXIT_OK


def cmd_audit(cfg: RunConfig, args, stdout: TextIO, stderr: TextIO) -> int:
    audit = syntax_audit(_registry(cfg, args), _suffix_rules(cfg))
    if cfg.format == "json":
        text = audit_to_json(audit)
    elif cfg.format == "csv":
        text = audit_to_csv(audit)
    else:
        text = audit_to_text(audit)
    _write(cfg, text, stdout)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "querygen": cmd_querygen,
    "fetch": cmd_fetch,
    "analyze": cmd_analyze,
    "audit": cmd_audit,
}


def main(argv: Optional[Sequence[str]] = None, stdout: TextIO = None, stderr: TextIO = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args, stdout, stderr)
    except (UsageError, ConfigurationError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


def entrypoint() -> None:
    for stream in (sys.stdout, sys.stderr):
        if hasattr(stream, "reconfigure"):
            stream.reconfigure(encoding="utf-8", newline="\n")
    try:
        code = main()
        sys.stdout.flush()
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head)
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = EXIT_OK
    sys.exit(code)


if __name__ == "__main__":
    entrypoint()
