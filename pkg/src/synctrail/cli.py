"""Command-line entry point.

Subcommands mirror the pipeline stages: simulate, ingest, seal, verify,
diff, correlate, enrich, report, and run-all which chains them. Data
goes to files, human diagnostics go to stderr, and the exit code says
what happened: 0 success, 2 usage error, 3 custody violated (tampered
chain), 4 fatal input problem.

Analysis subcommands are deterministic by contract; the only randomness
in the tool lives in the simulator behind an explicit seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .acquisition import (
    AppStatus,
    DeviceDump,
    LedgerEntry,
    dump_to_json_dict,
    ingest_cloud_log,
    ingest_device_dump,
    parse_app_inventory,
    parse_comm_artifacts,
    parse_email_accounts,
    profile_format_warnings,
)
from .correlation import (
    DEFAULT_MIN_SKEW_SUPPORT,
    DEFAULT_WINDOW_SECONDS,
    build_timeline,
    derive_cloud_usage_findings,
    detect_uninstall_evidence,
    estimate_clock_skew,
    match_synced_artifacts,
    zero_skew,
)
from .errors import (
    DeviceMismatch,
    DuplicateEventId,
    DuplicateRecordId,
    EmptyBundle,
    ImpossibleDate,
    InsufficientSupport,
    IoFailure,
    MalformedTable,
    MissingManifest,
    RecordCountMismatch,
    UnparseableTimestamp,
    UnsupportedAlgorithm,
)
from .evidence import Locale, canonical_encode
from .osint import build_identity_graph, load_geo_table, resolve_ip
from .preservation import (
    IsolationMethod,
    Verdict,
    VerificationReport,
    diff_acquisitions,
    load_sealed_manifest,
    seal_dump,
    verify_chain,
    write_sealed_manifest,
)
from .reporting import (
    CaseReport,
    ReportFormat,
    finding_to_dict,
    identity_graph_to_dict,
    geo_to_list,
    ledger_to_list,
    link_to_dict,
    render_report,
    skew_to_dict,
    timeline_to_list,
)
from .simulator import SimParams, generate_case

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_TAMPERED = 3
EXIT_PARSE_FATAL = 4

TIMESTAMP_ASSUMPTION = (
    "All times normalized to UTC; legacy device timestamps read per the locale "
    "flag; sources without zone data are assumed UTC"
)

_LOCALES = {"day-first": Locale.DAY_FIRST, "month-first": Locale.MONTH_FIRST}
_FORMATS = {"json": ReportFormat.JSON, "md": ReportFormat.MARKDOWN, "html": ReportFormat.HTML}
_ISOLATION = {
    "airplane-mode": IsolationMethod.AIRPLANE_MODE,
    "powered-off": IsolationMethod.POWERED_OFF,
    "shielded-container": IsolationMethod.SHIELDED_CONTAINER,
    "radio-isolation": IsolationMethod.RADIO_ISOLATION,
    "none": IsolationMethod.NONE,
}

_FATAL_ERRORS = (
    MissingManifest,
    DuplicateRecordId,
    DuplicateEventId,
    UnsupportedAlgorithm,
    MalformedTable,
    UnparseableTimestamp,
    ImpossibleDate,
    DeviceMismatch,
    EmptyBundle,
    IoFailure,
    OSError,
)


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def _write_json(path: Path, payload: object) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _read_json(path: Path, default: object) -> object:
    if not path.is_file():
        return default
    return json.loads(path.read_text(encoding="utf-8"))


def _step_ingest(
    bundle: Path, out: Path, locale: Locale, dump_canonical: Optional[Path] = None
) -> DeviceDump:
    dump = ingest_device_dump(bundle, locale)
    for warning in profile_format_warnings(dump.device):
        _say(f"note: {warning}")
    parse_ledger: list[LedgerEntry] = []
    apps = parse_app_inventory(dump, parse_ledger)
    payload = dump_to_json_dict(dump)
    payload["app_counts"] = {
        "installed": sum(1 for a in apps if a.status is not AppStatus.UNINSTALLED),
        "uninstalled": sum(1 for a in apps if a.status is AppStatus.UNINSTALLED),
    }
    payload["parse_ledger"] = ledger_to_list(parse_ledger)
    _write_json(out / "dump.json", payload)
    if dump_canonical is not None:
        dump_canonical.parent.mkdir(parents=True, exist_ok=True)
        dump_canonical.write_bytes(b"".join(canonical_encode(r) for r in dump.records))
        _say(f"canonical record bytes written to {dump_canonical}")
    _say(
        f"ingested {len(dump.records)} records from {bundle.name} "
        f"({len(dump.ledger)} ledger entries)"
    )
    return dump


def _step_seal(
    bundle: Path, locale: Locale, examiner: str, isolation: IsolationMethod
) -> None:
    dump = ingest_device_dump(bundle, locale)
    manifest = seal_dump(dump, examiner=examiner, isolation_method=isolation)
    path = write_sealed_manifest(manifest, bundle)
    _say(
        f"sealed {manifest.record_count} records, chain head "
        f"{manifest.chain_head.hex()} -> {path.name}"
    )


def _step_verify(bundle: Path, out: Optional[Path], locale: Locale) -> VerificationReport:
    manifest = load_sealed_manifest(bundle)
    dump = ingest_device_dump(bundle, locale)
    try:
        report = verify_chain(manifest, dump.records)
    except RecordCountMismatch as exc:
        # A record added or removed after sealing is custody violation,
        # surfaced with the tampered exit code rather than a parse error.
        _say(f"verification failed: {exc}")
        report = VerificationReport(verdict=Verdict.TAMPERED, first_divergent_index=0)
    if out is not None:
        _write_json(
            out / "verification.json",
            {
                "verdict": report.verdict.value,
                "first_divergent_index": report.first_divergent_index,
                "expected": report.expected.hex() if report.expected else None,
                "actual": report.actual.hex() if report.actual else None,
            },
        )
    _say(f"chain verdict: {report.verdict.value}")
    return report


def _step_correlate(
    bundle: Path,
    cloud_log: Path,
    out: Path,
    locale: Locale,
    window_seconds: int,
    min_support: int,
) -> None:
    dump = ingest_device_dump(bundle, locale)
    cloud_ledger: list[LedgerEntry] = []
    events = ingest_cloud_log(cloud_log, cloud_ledger)

    try:
        skew = estimate_clock_skew(dump.records, events, min_support)
    except InsufficientSupport as exc:
        _say(f"warning: {exc}; proceeding with offset 0")
        skew = zero_skew()

    links = match_synced_artifacts(dump.records, events, skew, window_seconds)
    timeline = build_timeline(dump.records, events, skew)
    parse_ledger: list[LedgerEntry] = []
    apps = parse_app_inventory(dump, parse_ledger)
    uninstall = detect_uninstall_evidence(apps, events)
    findings = derive_cloud_usage_findings(links, timeline, uninstall, events)

    _write_json(out / "skew.json", skew_to_dict(skew))
    _write_json(out / "links.json", [link_to_dict(link) for link in links])
    _write_json(
        out / "timeline.json",
        {"entries": timeline_to_list(timeline), "excluded_undated": timeline.excluded_undated},
    )
    _write_json(
        out / "findings.json",
        [finding_to_dict(f, f"F{i + 1:03d}") for i, f in enumerate(findings)],
    )
    _write_json(
        out / "cloud_log.json",
        {
            "name": cloud_log.name,
            "event_count": len(events),
            "ledger": ledger_to_list(cloud_ledger),
        },
    )
    _write_json(
        out / "parameters.json",
        {
            "window_seconds": window_seconds,
            "min_skew_support": min_support,
            "locale": locale.value,
            "timestamp_assumption": TIMESTAMP_ASSUMPTION,
        },
    )
    _say(
        f"correlated: skew {skew.offset_seconds} s "
        f"({'fallback' if skew.fallback else f'support {skew.support_count}'}), "
        f"{len(links)} links, {len(findings)} findings"
    )


def _step_enrich(bundle: Path, out: Path, locale: Locale, geo_table: Optional[Path]) -> None:
    dump = ingest_device_dump(bundle, locale)
    messages, calls, contacts = parse_comm_artifacts(dump)
    emails = parse_email_accounts(dump)
    graph = build_identity_graph(contacts, messages, calls, emails)
    _write_json(out / "identity_graph.json", identity_graph_to_dict(graph))

    geo_hits = []
    if geo_table is not None:
        table = load_geo_table(geo_table)
        seen = set()
        for record in dump.records:
            ip = record.attributes.get("ip")
            if not ip or ip in seen:
                continue
            seen.add(ip)
            hit = resolve_ip(ip, table)
            if hit is not None:
                geo_hits.append(hit)
    _write_json(out / "geo.json", geo_to_list(geo_hits))
    _say(
        f"enriched: {len(graph.nodes)} identifiers, {len(graph.edges)} edges, "
        f"{len(geo_hits)} geolocated addresses"
    )


def _step_report(out: Path, case_id: Optional[str], format: ReportFormat) -> Path:
    dump_data = _read_json(out / "dump.json", {})
    verification = _read_json(out / "verification.json", None)
    parameters = _read_json(
        out / "parameters.json",
        {
            "window_seconds": DEFAULT_WINDOW_SECONDS,
            "min_skew_support": DEFAULT_MIN_SKEW_SUPPORT,
            "locale": Locale.DAY_FIRST.value,
            "timestamp_assumption": TIMESTAMP_ASSUMPTION,
        },
    )
    timeline_data = _read_json(out / "timeline.json", {"entries": [], "excluded_undated": 0})
    cloud_meta = _read_json(out / "cloud_log.json", None)

    effective_case_id = case_id or dump_data.get("dump_id") or "case"
    device = dict(dump_data.get("device", {}))
    app_counts = dump_data.get("app_counts")
    if app_counts:
        device["installed_app_count"] = app_counts["installed"]
        device["uninstalled_app_count"] = app_counts["uninstalled"]

    inputs: dict = {"dumps": [], "cloud_logs": []}
    ledger = list(dump_data.get("ledger", [])) + list(dump_data.get("parse_ledger", []))
    if dump_data:
        inputs["dumps"].append(
            {
                "dump_id": dump_data["dump_id"],
                "collected_at": dump_data["collected_at"],
                "record_count": len(dump_data.get("records", [])),
                "chain_verdict": verification["verdict"] if verification else "Unverified",
            }
        )
    if cloud_meta:
        inputs["cloud_logs"].append(
            {"name": cloud_meta["name"], "event_count": cloud_meta["event_count"]}
        )
        ledger.extend(cloud_meta.get("ledger", []))

    report = CaseReport(
        case_id=effective_case_id,
        tool_version=__version__,
        parameters=parameters,
        inputs=inputs,
        device=device,
        skew=_read_json(out / "skew.json", None),
        links=_read_json(out / "links.json", []),
        findings=_read_json(out / "findings.json", []),
        timeline=timeline_data.get("entries", []),
        excluded_undated=timeline_data.get("excluded_undated", 0),
        identity_graph=_read_json(out / "identity_graph.json", {"nodes": [], "edges": []}),
        geo=_read_json(out / "geo.json", []),
        error_ledger=ledger,
    )
    suffix = {"json": ".report.json", "md": ".report.md", "html": ".report.html"}[format.value]
    path = out / f"{effective_case_id}{suffix}"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(render_report(report, format))
    _say(f"report written to {path}")
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synctrail",
        description=(
            "Correlate mobile device artifact dumps with cloud event logs to prove "
            "cloud service usage, under tamper-evident hash chains."
        ),
    )
    parser.add_argument("--version", action="version", version=f"synctrail {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_locale(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--locale",
            choices=sorted(_LOCALES),
            default="day-first",
            help="reading order for legacy DD/MM timestamps (default: day-first)",
        )

    def add_out(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")

    p = sub.add_parser("simulate", help="generate a synthetic case with ground truth")
    add_out(p)
    p.add_argument("--seed", type=int, required=True, help="64-bit generator seed")
    p.add_argument("--apps", type=int, default=6)
    p.add_argument("--messages", type=int, default=8)
    p.add_argument("--calls", type=int, default=4)
    p.add_argument("--uploads", type=int, default=10)
    p.add_argument("--skew-seconds", type=int, default=0)
    p.add_argument("--sync-lag-max", type=int, default=2)
    p.add_argument("--uninstall-fraction", type=float, default=0.2)
    p.add_argument("--no-digest-logging", action="store_true")

    p = sub.add_parser("ingest", help="parse a bundle into dump.json")
    p.add_argument("bundle", type=Path)
    add_out(p)
    add_locale(p)
    p.add_argument(
        "--dump-canonical",
        type=Path,
        metavar="FILE",
        help="debug: also write the concatenated canonical record bytes",
    )

    p = sub.add_parser("seal", help="compute the custody chain over a bundle")
    p.add_argument("bundle", type=Path)
    add_locale(p)
    p.add_argument("--examiner", default="unknown")
    p.add_argument("--isolation", choices=sorted(_ISOLATION), default="none")

    p = sub.add_parser("verify", help="verify a sealed bundle (exit 3 when tampered)")
    p.add_argument("bundle", type=Path)
    add_locale(p)
    p.add_argument("--out", type=Path, default=None, help="also write verification.json here")

    p = sub.add_parser("diff", help="compare two acquisitions of the same device")
    p.add_argument("bundle_a", type=Path)
    p.add_argument("bundle_b", type=Path)
    add_out(p)
    add_locale(p)
    p.add_argument("--allow-device-mismatch", action="store_true")

    p = sub.add_parser("correlate", help="estimate skew, match artifacts, derive findings")
    p.add_argument("bundle", type=Path)
    p.add_argument("cloud_log", type=Path)
    add_out(p)
    add_locale(p)
    p.add_argument("--window-seconds", type=int, default=DEFAULT_WINDOW_SECONDS)
    p.add_argument("--min-skew-support", type=int, default=DEFAULT_MIN_SKEW_SUPPORT)

    p = sub.add_parser("enrich", help="identity graph and offline IP geolocation")
    p.add_argument("bundle", type=Path)
    add_out(p)
    add_locale(p)
    p.add_argument("--geo-table", type=Path, default=None, help="CSV range table")

    p = sub.add_parser("report", help="render the case report from prior stage outputs")
    add_out(p)
    p.add_argument("--case-id", default=None)
    p.add_argument("--format", choices=sorted(_FORMATS), default="json")

    p = sub.add_parser("run-all", help="ingest, seal, verify, correlate, enrich, report")
    p.add_argument("bundle", type=Path)
    p.add_argument("cloud_log", type=Path)
    add_out(p)
    add_locale(p)
    p.add_argument("--window-seconds", type=int, default=DEFAULT_WINDOW_SECONDS)
    p.add_argument("--min-skew-support", type=int, default=DEFAULT_MIN_SKEW_SUPPORT)
    p.add_argument("--examiner", default="unknown")
    p.add_argument("--isolation", choices=sorted(_ISOLATION), default="none")
    p.add_argument("--geo-table", type=Path, default=None)
    p.add_argument("--case-id", default=None)
    p.add_argument("--format", choices=sorted(_FORMATS), default="json")

    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, execute one subcommand, return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    try:
        if args.command == "simulate":
            try:
                params = SimParams(
                    seed=args.seed,
                    n_apps=args.apps,
                    n_messages=args.messages,
                    n_calls=args.calls,
                    n_uploads=args.uploads,
                    skew_seconds=args.skew_seconds,
                    sync_lag_max_s=args.sync_lag_max,
                    uninstall_fraction=args.uninstall_fraction,
                    digest_logging=not args.no_digest_logging,
                )
            except ValueError as exc:
                _say(f"error: {exc}")
                return EXIT_USAGE
            case = generate_case(params, args.out)
            _say(f"case written: {case.bundle_dir} and {case.cloud_log}")
            return EXIT_OK

        locale = _LOCALES[getattr(args, "locale", "day-first")]

        if args.command == "ingest":
            _step_ingest(args.bundle, args.out, locale, args.dump_canonical)
            return EXIT_OK

        if args.command == "seal":
            _step_seal(args.bundle, locale, args.examiner, _ISOLATION[args.isolation])
            return EXIT_OK

        if args.command == "verify":
            report = _step_verify(args.bundle, args.out, locale)
            return EXIT_OK if report.verdict is Verdict.INTACT else EXIT_TAMPERED

        if args.command == "diff":
            a = ingest_device_dump(args.bundle_a, locale)
            b = ingest_device_dump(args.bundle_b, locale)
            diff = diff_acquisitions(a, b, allow_device_mismatch=args.allow_device_mismatch)
            _write_json(
                args.out / "diff.json",
                {
                    "added": list(diff.added),
                    "removed": list(diff.removed),
                    "changed": list(diff.changed),
                    "identical_count": diff.identical_count,
                },
            )
            _say(
                f"diff: {len(diff.added)} added, {len(diff.removed)} removed, "
                f"{len(diff.changed)} changed, {diff.identical_count} identical"
            )
            return EXIT_OK

        if args.command == "correlate":
            _step_correlate(
                args.bundle,
                args.cloud_log,
                args.out,
                locale,
                args.window_seconds,
                args.min_skew_support,
            )
            return EXIT_OK

        if args.command == "enrich":
            _step_enrich(args.bundle, args.out, locale, args.geo_table)
            return EXIT_OK

        if args.command == "report":
            _step_report(args.out, args.case_id, _FORMATS[args.format])
            return EXIT_OK

        if args.command == "run-all":
            _step_ingest(args.bundle, args.out, locale)
            # Never re-seal an already sealed bundle: that would launder
            # any modification made since the original seal.
            if (args.bundle / "manifest.sealed.json").is_file():
                _say("bundle already sealed, keeping the existing manifest")
            else:
                _step_seal(args.bundle, locale, args.examiner, _ISOLATION[args.isolation])
            verification = _step_verify(args.bundle, args.out, locale)
            _step_correlate(
                args.bundle,
                args.cloud_log,
                args.out,
                locale,
                args.window_seconds,
                args.min_skew_support,
            )
            _step_enrich(args.bundle, args.out, locale, args.geo_table)
            _step_report(args.out, args.case_id, _FORMATS[args.format])
            return EXIT_OK if verification.verdict is Verdict.INTACT else EXIT_TAMPERED

    except _FATAL_ERRORS as exc:
        _say(f"error: {exc}")
        return EXIT_PARSE_FATAL

    raise AssertionError(f"unhandled subcommand {args.command!r}")


def main() -> None:
    sys.exit(run())
