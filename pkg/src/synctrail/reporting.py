"""Deterministic case reports.

The JSON rendering is the source of truth; Markdown and HTML are pure
re-renderings of the same data with nothing added. Identical inputs
produce byte-identical output in every format, which is why no report
ever contains a wall-clock time, an absolute path, or unordered
collections.
"""

from __future__ import annotations

import copy
import hashlib
import html
import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .acquisition import AppRecord, AppStatus, DeviceDump, LedgerEntry, dump_to_json_dict
from .correlation import CloudUsageFinding, SkewEstimate, SyncLink, UnifiedTimeline
from .osint import GeoRecord, IdentityGraph
from .preservation import VerificationReport

logger = logging.getLogger(__name__)

_REDACTED_RE = re.compile(r"^\[REDACTED:[0-9a-f]{8}\]$")


class ReportFormat(Enum):
    JSON = "json"
    MARKDOWN = "md"
    HTML = "html"


@dataclass(frozen=True)
class CaseReport:
    """Assembled case data, already in JSON-ready form.

    Every section exists even when empty so a report's shape never
    depends on what the case happened to contain.
    """

    case_id: str
    tool_version: str
    parameters: dict
    inputs: dict
    device: dict
    skew: Optional[dict]
    links: list = field(default_factory=list)
    findings: list = field(default_factory=list)
    timeline: list = field(default_factory=list)
    excluded_undated: int = 0
    identity_graph: dict = field(default_factory=dict)
    geo: list = field(default_factory=list)
    error_ledger: list = field(default_factory=list)


def skew_to_dict(skew: SkewEstimate) -> dict:
    return {
        "offset_seconds": skew.offset_seconds,
        "support_count": skew.support_count,
        "spread_seconds": skew.spread_seconds,
        "fallback": skew.fallback,
    }


def link_to_dict(link: SyncLink) -> dict:
    return {
        "device_record_id": link.device_record_id,
        "cloud_event_id": link.cloud_event_id,
        "tier": link.tier.value,
        "time_delta_seconds": link.time_delta_seconds,
    }


def finding_to_dict(finding: CloudUsageFinding, finding_id: str) -> dict:
    return {
        "finding_id": finding_id,
        "kind": finding.kind.value,
        "confidence": finding.confidence.value,
        "supporting_ids": list(finding.supporting_ids),
        "narrative": finding.narrative,
    }


def timeline_to_list(timeline: UnifiedTimeline) -> list:
    return [
        {
            "timestamp_utc": entry.timestamp.to_iso(),
            "source": entry.source.value,
            "id": entry.ref_id,
            "label": entry.label,
        }
        for entry in timeline.entries
    ]


def identity_graph_to_dict(graph: IdentityGraph) -> dict:
    nodes = sorted(graph.nodes, key=lambda n: (n.kind.value, n.value))
    edges = sorted(
        graph.edges.items(),
        key=lambda item: (
            item[0][0].kind.value,
            item[0][0].value,
            item[0][1].kind.value,
            item[0][1].value,
        ),
    )
    return {
        "nodes": [{"kind": n.kind.value, "value": n.value} for n in nodes],
        "edges": [
            {
                "a": {"kind": a.kind.value, "value": a.value},
                "b": {"kind": b.kind.value, "value": b.value},
                "count": count,
            }
            for (a, b), count in edges
        ],
    }


def geo_to_list(records: Sequence[GeoRecord]) -> list:
    return [
        {"ip": r.ip, "country": r.country, "city": r.city, "source_table": r.source_table}
        for r in sorted(records, key=lambda r: r.ip)
    ]


def ledger_to_list(entries: Sequence[LedgerEntry]) -> list:
    return [{"file": e.file, "line": e.line, "message": e.message} for e in entries]


def assemble_case_report(
    case_id: str,
    tool_version: str,
    parameters: dict,
    dump: Optional[DeviceDump] = None,
    apps: Sequence[AppRecord] = (),
    cloud_log_names: Sequence[str] = (),
    cloud_event_count: int = 0,
    verification: Optional[VerificationReport] = None,
    skew: Optional[SkewEstimate] = None,
    links: Sequence[SyncLink] = (),
    findings: Sequence[CloudUsageFinding] = (),
    timeline: Optional[UnifiedTimeline] = None,
    identity_graph: Optional[IdentityGraph] = None,
    geo: Sequence[GeoRecord] = (),
    extra_ledger: Sequence[LedgerEntry] = (),
) -> CaseReport:
    """Fold the outputs of every pipeline stage into one report."""
    device: dict = {}
    inputs: dict = {"dumps": [], "cloud_logs": []}
    ledger: list[LedgerEntry] = []
    if dump is not None:
        device = dump_to_json_dict(dump)["device"]
        device["installed_app_count"] = sum(
            1 for a in apps if a.status is not AppStatus.UNINSTALLED
        )
        device["uninstalled_app_count"] = sum(
            1 for a in apps if a.status is AppStatus.UNINSTALLED
        )
        inputs["dumps"].append(
            {
                "dump_id": dump.dump_id,
                "collected_at": dump.collected_at.original_text,
                "record_count": len(dump.records),
                "chain_verdict": verification.verdict.value if verification else "Unverified",
            }
        )
        ledger.extend(dump.ledger)
    inputs["cloud_logs"] = [
        {"name": name, "event_count": cloud_event_count} for name in cloud_log_names
    ]
    ledger.extend(extra_ledger)

    return CaseReport(
        case_id=case_id,
        tool_version=tool_version,
        parameters=parameters,
        inputs=inputs,
        device=device,
        skew=skew_to_dict(skew) if skew is not None else None,
        links=[link_to_dict(link) for link in links],
        findings=[
            finding_to_dict(finding, f"F{index + 1:03d}")
            for index, finding in enumerate(findings)
        ],
        timeline=timeline_to_list(timeline) if timeline is not None else [],
        excluded_undated=timeline.excluded_undated if timeline is not None else 0,
        identity_graph=identity_graph_to_dict(identity_graph)
        if identity_graph is not None
        else {"nodes": [], "edges": []},
        geo=geo_to_list(geo),
        error_ledger=ledger_to_list(ledger),
    )


def report_to_json_dict(case: CaseReport) -> dict:
    return {
        "case_id": case.case_id,
        "tool_version": case.tool_version,
        "parameters": case.parameters,
        "inputs": case.inputs,
        "device": case.device,
        "skew": case.skew,
        "links": case.links,
        "findings": case.findings,
        "timeline": case.timeline,
        "excluded_undated": case.excluded_undated,
        "identity_graph": case.identity_graph,
        "geo": case.geo,
        "error_ledger": case.error_ledger,
    }


def render_report(case: CaseReport, format: ReportFormat = ReportFormat.JSON) -> bytes:
    """Render a report; same case in, same bytes out, in every format."""
    data = report_to_json_dict(case)
    if format is ReportFormat.JSON:
        return (json.dumps(data, indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    if format is ReportFormat.MARKDOWN:
        return _render_markdown(data).encode("utf-8")
    return _render_html(data).encode("utf-8")


def redact(report_json: dict, policy: Sequence[str]) -> dict:
    """Replace the values of policy-named keys, keeping them linkable.

    A redacted value becomes ``[REDACTED:<first 8 hex of its SHA-256>]``
    so two occurrences of the same value stay correlatable without
    disclosure. Applying the same policy again changes nothing. Policy
    keys that matched nothing are logged and skipped.
    """
    matched: set[str] = set()
    wanted = set(policy)

    def mask(value: object) -> str:
        text = value if isinstance(value, str) else json.dumps(value, ensure_ascii=False)
        if _REDACTED_RE.match(text):
            return text
        prefix = hashlib.sha256(text.encode("utf-8")).hexdigest()[:8]
        return f"[REDACTED:{prefix}]"

    def walk(node: object) -> object:
        if isinstance(node, dict):
            replaced = {}
            for key, value in node.items():
                if key in wanted:
                    matched.add(key)
                    replaced[key] = mask(value)
                else:
                    replaced[key] = walk(value)
            return replaced
        if isinstance(node, list):
            return [walk(item) for item in node]
        return node

    result = walk(copy.deepcopy(report_json))
    for key in sorted(wanted - matched):
        logger.warning("redaction policy key %r matched no attribute", key)
    return result


def _fmt(value: object) -> str:
    # Render scalars the way the JSON does; the Markdown adds nothing.
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _render_markdown(data: dict) -> str:
    out: list[str] = []
    out.append(f"# Case report: {data['case_id']}")
    out.append("")
    out.append(f"Produced by synctrail {data['tool_version']}.")
    out.append("")
    out.append("## Parameters")
    out.append("")
    for key in sorted(data["parameters"]):
        out.append(f"- {key}: {_fmt(data['parameters'][key])}")
    out.append("")
    out.append("## Inputs")
    out.append("")
    for dump in data["inputs"]["dumps"]:
        out.append(
            f"- Dump `{dump['dump_id']}` collected {dump['collected_at']}, "
            f"{dump['record_count']} records, chain verdict {dump['chain_verdict']}"
        )
    for log in data["inputs"]["cloud_logs"]:
        out.append(f"- Cloud log `{log['name']}`, {log['event_count']} events")
    if not data["inputs"]["dumps"] and not data["inputs"]["cloud_logs"]:
        out.append("- none")
    out.append("")
    out.append("## Device")
    out.append("")
    if data["device"]:
        for key in sorted(data["device"]):
            value = data["device"][key]
            if value is not None:
                out.append(f"- {key}: {_fmt(value)}")
    else:
        out.append("- no device profile")
    out.append("")
    out.append("## Clock skew")
    out.append("")
    if data["skew"] is None:
        out.append("- not estimated")
    else:
        skew = data["skew"]
        out.append(
            f"- offset {skew['offset_seconds']} s from {skew['support_count']} matched "
            f"pairs, spread {skew['spread_seconds']} s"
        )
        if skew["fallback"]:
            out.append("- WARNING: insufficient support, fell back to offset 0")
    out.append("")
    out.append(f"## Findings ({len(data['findings'])})")
    out.append("")
    for finding in data["findings"]:
        out.append(
            f"- **{finding['finding_id']}** {finding['kind']} "
            f"[{finding['confidence']}]: {finding['narrative']} "
            f"(supporting: {', '.join(finding['supporting_ids'])})"
        )
    if not data["findings"]:
        out.append("- none")
    out.append("")
    out.append(f"## Sync links ({len(data['links'])})")
    out.append("")
    for link in data["links"]:
        delta = link["time_delta_seconds"]
        delta_text = "n/a" if delta is None else f"{delta} s"
        out.append(
            f"- {link['device_record_id']} <-> {link['cloud_event_id']} "
            f"({link['tier']}, delta {delta_text})"
        )
    if not data["links"]:
        out.append("- none")
    out.append("")
    out.append(f"## Timeline ({len(data['timeline'])} entries)")
    out.append("")
    if data["timeline"]:
        out.append("| Time (UTC) | Side | Id | Kind |")
        out.append("| --- | --- | --- | --- |")
        for entry in data["timeline"]:
            out.append(
                f"| {entry['timestamp_utc']} | {entry['source']} | {entry['id']} "
                f"| {entry['label']} |"
            )
    else:
        out.append("(empty)")
    if data["excluded_undated"]:
        out.append("")
        out.append(f"{data['excluded_undated']} undated record(s) excluded from the timeline.")
    out.append("")
    graph = data["identity_graph"]
    out.append(
        f"## Identity graph ({len(graph.get('nodes', []))} identifiers, "
        f"{len(graph.get('edges', []))} links)"
    )
    out.append("")
    for edge in graph.get("edges", []):
        out.append(
            f"- {edge['a']['value']} ({edge['a']['kind']}) -- "
            f"{edge['b']['value']} ({edge['b']['kind']}): seen together {edge['count']}x"
        )
    if not graph.get("edges"):
        out.append("- none")
    out.append("")
    out.append(f"## Geolocation ({len(data['geo'])})")
    out.append("")
    for geo in data["geo"]:
        out.append(f"- {geo['ip']}: {geo['city']}, {geo['country']} ({geo['source_table']})")
    if not data["geo"]:
        out.append("- none")
    out.append("")
    out.append(f"## Error ledger ({len(data['error_ledger'])})")
    out.append("")
    for entry in data["error_ledger"]:
        out.append(f"- {entry['file']}:{entry['line']}: {entry['message']}")
    if not data["error_ledger"]:
        out.append("- none")
    out.append("")
    return "\n".join(out)


def _render_html(data: dict) -> str:
    # Self-contained static page: inline styles, no scripts, opens anywhere.
    markdown_body = _render_markdown(data)
    rows = []
    for line in markdown_body.splitlines():
        if line.startswith("# "):
            rows.append(f"<h1>{html.escape(line[2:])}</h1>")
        elif line.startswith("## "):
            rows.append(f"<h2>{html.escape(line[3:])}</h2>")
        elif line.startswith("| "):
            cells = [html.escape(c.strip()) for c in line.strip("|").split("|")]
            if set(cells) <= {"---"}:
                continue
            tag = "td"
            rows.append("<tr>" + "".join(f"<{tag}>{c}</{tag}>" for c in cells) + "</tr>")
        elif line.startswith("- "):
            rows.append(f"<li>{html.escape(line[2:])}</li>")
        elif line:
            rows.append(f"<p>{html.escape(line)}</p>")
    body = "\n".join(rows)
    return (
        "<!DOCTYPE html>\n"
        "<html><head><meta charset=\"utf-8\">"
        f"<title>Case report: {html.escape(data['case_id'])}</title>"
        "<style>body{font-family:sans-serif;margin:2em;color:#222}"
        "h1{border-bottom:2px solid #444}h2{margin-top:1.5em;color:#345}"
        "li{margin:0.2em 0}tr:nth-child(even){background:#f4f4f4}"
        "td{padding:2px 8px;border:1px solid #ddd}</style></head>\n"
        f"<body>\n{body}\n</body></html>\n"
    )
