"""Parsers for device dump bundles and cloud event logs.

A bundle is a directory holding ``manifest.json`` plus one JSON Lines
file per artifact category. Parsing is lossless modulo the error
ledger: every input line either becomes a typed record or a ledger
entry, never both and never neither. Only identity collisions are
fatal, because those would corrupt custody.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional

from .errors import (
    DuplicateEventId,
    DuplicateRecordId,
    ImpossibleDate,
    MissingManifest,
    UnparseableTimestamp,
)
from .evidence import (
    ArtifactCategory,
    Digest256,
    EvidenceRecord,
    Locale,
    Source,
    UtcTimestamp,
    normalize_timestamp,
)

BUNDLE_MANIFEST = "manifest.json"

# Category files in canonical order; record order in a dump is file order
# within this sequence. The per-category timestamp field, when present,
# becomes the record's normalized timestamp.
CATEGORY_FILES: tuple[tuple[str, ArtifactCategory], ...] = (
    ("device_info.jsonl", ArtifactCategory.DEVICE_INFO),
    ("installed_apps.jsonl", ArtifactCategory.INSTALLED_APP),
    ("messages.jsonl", ArtifactCategory.MESSAGE),
    ("calls.jsonl", ArtifactCategory.CALL_RECORD),
    ("contacts.jsonl", ArtifactCategory.CONTACT),
    ("wifi_history.jsonl", ArtifactCategory.WIFI_HISTORY),
    ("browser_history.jsonl", ArtifactCategory.BROWSER_HISTORY),
    ("sim.jsonl", ArtifactCategory.SIM_CARD),
    ("configured_emails.jsonl", ArtifactCategory.CONFIGURED_EMAIL),
    ("running_apps.jsonl", ArtifactCategory.RUNNING_APP),
    ("phone_state.jsonl", ArtifactCategory.PHONE_STATE),
)

TIME_FIELDS: dict[ArtifactCategory, str] = {
    ArtifactCategory.DEVICE_INFO: "device_clock",
    ArtifactCategory.INSTALLED_APP: "installed",
    ArtifactCategory.MESSAGE: "delivered_at",
    ArtifactCategory.CALL_RECORD: "at",
    ArtifactCategory.BROWSER_HISTORY: "visited_at",
    ArtifactCategory.WIFI_HISTORY: "last_connected",
    ArtifactCategory.CLOUD_EVENT: "ts",
}

_KNOWN_FILES = {name for name, _ in CATEGORY_FILES}

_PROFILE_BOOL_FIELDS = (
    "developer_option_enabled",
    "encryption_enabled",
    "flight_mode_on",
    "screen_lock_enabled",
    "screen_saver_enabled",
)
_PHONE_STATE_BOOLS = (
    "screen_lock_enabled",
    "screen_saver_enabled",
    "developer_option_enabled",
    "flight_mode_on",
)


class AppStatus(Enum):
    ALL = "All"
    THIRD_PARTY = "ThirdParty"
    DISABLED = "Disabled"
    UNINSTALLED = "Uninstalled"


class Direction(Enum):
    INCOMING = "Incoming"
    OUTGOING = "Outgoing"


class EventKind(Enum):
    INSTALL = "Install"
    UNINSTALL = "Uninstall"
    UPLOAD = "Upload"
    DOWNLOAD = "Download"
    LOGIN = "Login"
    SYNC = "Sync"


_STATUS_BY_KEY = {s.value.lower(): s for s in AppStatus}
_DIRECTION_BY_KEY = {d.value.lower(): d for d in Direction}
_KIND_BY_KEY = {k.value.lower(): k for k in EventKind}


@dataclass(frozen=True)
class LedgerEntry:
    """One recoverable parse problem, pinned to its source line.

    Line 0 marks file-level notes (for example an unrecognized category
    file) that do not consume an input line.
    """

    file: str
    line: int
    message: str


@dataclass(frozen=True)
class DeviceProfile:
    model: Optional[str] = None
    device_name: Optional[str] = None
    android_version: Optional[str] = None
    sdk_level: Optional[str] = None
    brand: Optional[str] = None
    manufacturer: Optional[str] = None
    kernel_name: Optional[str] = None
    wifi_mac: Optional[str] = None
    wifi_ssid: Optional[str] = None
    bluetooth_mac: Optional[str] = None
    imei: Optional[str] = None
    developer_option_enabled: Optional[bool] = None
    encryption_enabled: Optional[bool] = None
    flight_mode_on: Optional[bool] = None
    screen_lock_enabled: Optional[bool] = None
    screen_saver_enabled: Optional[bool] = None
    battery_percent: Optional[int] = None
    device_clock_at_acquisition: Optional[UtcTimestamp] = None


@dataclass(frozen=True)
class AppRecord:
    app_name: str
    status: AppStatus
    package: Optional[str] = None
    installed_at: Optional[UtcTimestamp] = None
    record_id: Optional[str] = None


@dataclass(frozen=True)
class MessageRecord:
    peer_number: str
    body: str
    direction: Direction
    delivered_at: Optional[UtcTimestamp] = None
    record_id: Optional[str] = None


@dataclass(frozen=True)
class CallRecord:
    peer_number: str
    at: UtcTimestamp
    direction: Direction
    duration_s: Optional[int] = None
    record_id: Optional[str] = None


@dataclass(frozen=True)
class ContactRecord:
    display_name: str
    numbers: tuple[str, ...]
    record_id: Optional[str] = None


@dataclass(frozen=True)
class WifiRecord:
    ssid: str
    last_connected: Optional[UtcTimestamp] = None
    record_id: Optional[str] = None


@dataclass(frozen=True)
class BrowserRecord:
    url: str
    visited_at: Optional[UtcTimestamp]
    title: Optional[str] = None
    record_id: Optional[str] = None


@dataclass(frozen=True)
class SimRecord:
    status: Optional[str] = None
    operator_number: Optional[str] = None
    country: Optional[str] = None
    serial: Optional[str] = None
    sim_type: Optional[str] = None
    record_id: Optional[str] = None


@dataclass(frozen=True)
class EmailAccountRecord:
    address_or_number: str
    record_id: Optional[str] = None


@dataclass(frozen=True)
class RunningAppRecord:
    app_name: str
    record_id: Optional[str] = None


@dataclass(frozen=True)
class CloudEvent:
    """One entry of the cloud-side forensic log, on the cloud clock."""

    event_id: str
    kind: EventKind
    timestamp: UtcTimestamp
    account: str
    package_or_object: str
    content_digest: Optional[Digest256] = None
    size_bytes: Optional[int] = None


@dataclass(frozen=True)
class DeviceDump:
    """A fully ingested bundle: manifest data, records, and error ledger.

    ``line_counts`` holds the raw line count of every recognized category
    file so losslessness (records + ledgered lines = input lines) can be
    audited per file.
    """

    dump_id: str
    collected_at: UtcTimestamp
    zone_offset_minutes: int
    tool_name: str
    tool_version: str
    device: DeviceProfile
    records: tuple[EvidenceRecord, ...]
    ledger: tuple[LedgerEntry, ...] = ()
    line_counts: Mapping[str, int] = field(default_factory=dict)


class _LineError(Exception):
    """Internal: one line could not become a record; goes to the ledger."""


def _stringify(value: object) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return json.dumps(value)
    return json.dumps(value, ensure_ascii=False, separators=(",", ":"))


def record_from_fields(
    category: ArtifactCategory,
    fields: Mapping[str, object],
    file_name: str,
    line_no: int,
    locale: Locale,
    zone_offset_minutes: int,
) -> EvidenceRecord:
    """Build one evidence record from a parsed JSON Lines object.

    The ``id`` field becomes the record id (synthesized from file and
    line when absent); every other field is stringified into the
    attribute map, plus ``_file``/``_line`` provenance. Raises
    ``_LineError`` on anything that should be ledgered instead.
    """
    raw_id = fields.get("id")
    if raw_id is not None and not isinstance(raw_id, str):
        raise _LineError(f"id must be a string, got {type(raw_id).__name__}")
    record_id = raw_id if raw_id else f"{Path(file_name).stem}:{line_no}"

    attributes: dict[str, str] = {}
    for key, value in fields.items():
        if key == "id":
            continue
        if not isinstance(key, str) or not key:
            raise _LineError("attribute keys must be nonempty strings")
        if key.startswith("_"):
            raise _LineError(f"attribute key {key!r} uses the reserved '_' prefix")
        if value is None:
            continue
        attributes[key] = _stringify(value)
    attributes["_file"] = file_name
    attributes["_line"] = str(line_no)

    timestamp: Optional[UtcTimestamp] = None
    time_field = TIME_FIELDS.get(category)
    if time_field is not None:
        raw_time = fields.get(time_field)
        if raw_time is not None and raw_time != "":
            if not isinstance(raw_time, str):
                raise _LineError(f"{time_field} must be a string timestamp")
            try:
                timestamp = normalize_timestamp(raw_time, locale, zone_offset_minutes)
            except (UnparseableTimestamp, ImpossibleDate) as exc:
                raise _LineError(f"bad {time_field}: {exc}") from exc

    try:
        return EvidenceRecord(
            record_id=record_id,
            category=category,
            timestamp=timestamp,
            attributes=attributes,
            source=Source.DEVICE,
        )
    except ValueError as exc:
        raise _LineError(str(exc)) from exc


def _parse_bool(text: Optional[str]) -> Optional[bool]:
    if text is None:
        return None
    lowered = text.strip().lower()
    if lowered == "true":
        return True
    if lowered == "false":
        return False
    return None


def _build_profile(
    info: Optional[EvidenceRecord], state: Optional[EvidenceRecord]
) -> DeviceProfile:
    values: dict[str, object] = {}
    if info is not None:
        attrs = info.attributes
        for name in (
            "model",
            "device_name",
            "android_version",
            "sdk_level",
            "brand",
            "manufacturer",
            "kernel_name",
            "wifi_mac",
            "wifi_ssid",
            "bluetooth_mac",
            "imei",
        ):
            if name in attrs:
                values[name] = attrs[name]
        for name in _PROFILE_BOOL_FIELDS:
            parsed = _parse_bool(attrs.get(name))
            if parsed is not None:
                values[name] = parsed
        battery = attrs.get("battery_percent")
        if battery is not None:
            try:
                level = int(battery)
            except ValueError:
                level = -1
            if 0 <= level <= 100:
                values["battery_percent"] = level
        values["device_clock_at_acquisition"] = info.timestamp
    if state is not None:
        for name in _PHONE_STATE_BOOLS:
            parsed = _parse_bool(state.attributes.get(name))
            if parsed is not None:
                values[name] = parsed
    return DeviceProfile(**values)  # type: ignore[arg-type]


_MAC_RE = re.compile(r"^[0-9a-fA-F]{2}(:[0-9a-fA-F]{2}){5}$")


def profile_format_warnings(profile: DeviceProfile) -> list[str]:
    """Cosmetic format checks on identifier fields.

    Evidence is never rejected on format grounds (real extractions carry
    values like seven-group MACs); these notes only flag fields an
    examiner may want to eyeball.
    """
    warnings = []
    for label, value in (("wifi_mac", profile.wifi_mac), ("bluetooth_mac", profile.bluetooth_mac)):
        if value and not _MAC_RE.match(value):
            warnings.append(f"{label} {value!r} is not a canonical 6-group MAC, kept as-is")
    if profile.imei and not (profile.imei.isdigit() and 14 <= len(profile.imei) <= 16):
        warnings.append(f"imei {profile.imei!r} is not 14-16 digits, kept as-is")
    return warnings


def _load_manifest(bundle: Path) -> dict:
    manifest_path = bundle / BUNDLE_MANIFEST
    if not manifest_path.is_file():
        raise MissingManifest(f"no {BUNDLE_MANIFEST} in {bundle}")
    try:
        data = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MissingManifest(f"{manifest_path} unreadable: {exc}") from exc
    if not isinstance(data, dict):
        raise MissingManifest(f"{manifest_path} must hold a JSON object")
    for required in ("dump_id", "collected_at", "zone_offset_minutes"):
        if required not in data:
            raise MissingManifest(f"{manifest_path} missing field {required!r}")
    return data


def ingest_device_dump(bundle_path: Path | str, locale: Locale = Locale.DAY_FIRST) -> DeviceDump:
    """Parse a bundle directory into a DeviceDump.

    Records preserve file order across the canonical category sequence
    and carry their source file and line number as provenance
    attributes. Malformed lines land in the ledger and ingestion
    continues; a duplicated record id aborts with DuplicateRecordId.
    """
    bundle = Path(bundle_path)
    manifest = _load_manifest(bundle)
    zone_offset = int(manifest["zone_offset_minutes"])
    collected_at = normalize_timestamp(str(manifest["collected_at"]), locale, 0)

    records: list[EvidenceRecord] = []
    ledger: list[LedgerEntry] = []
    line_counts: dict[str, int] = {}
    seen_ids: dict[str, str] = {}
    first_info: Optional[EvidenceRecord] = None
    first_state: Optional[EvidenceRecord] = None

    for file_name, category in CATEGORY_FILES:
        path = bundle / file_name
        if not path.is_file():
            continue
        lines = path.read_text(encoding="utf-8").splitlines()
        line_counts[file_name] = len(lines)
        for line_no, line in enumerate(lines, start=1):
            try:
                fields = json.loads(line)
            except json.JSONDecodeError as exc:
                ledger.append(LedgerEntry(file_name, line_no, f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(fields, dict):
                ledger.append(LedgerEntry(file_name, line_no, "line is not a JSON object"))
                continue
            try:
                record = record_from_fields(
                    category, fields, file_name, line_no, locale, zone_offset
                )
            except _LineError as exc:
                ledger.append(LedgerEntry(file_name, line_no, str(exc)))
                continue
            where = f"{file_name}:{line_no}"
            if record.record_id in seen_ids:
                raise DuplicateRecordId(
                    f"record id {record.record_id!r} at {where} already used "
                    f"at {seen_ids[record.record_id]}"
                )
            seen_ids[record.record_id] = where
            records.append(record)
            if category is ArtifactCategory.DEVICE_INFO and first_info is None:
                first_info = record
            if category is ArtifactCategory.PHONE_STATE and first_state is None:
                first_state = record

    for path in sorted(bundle.glob("*.jsonl")):
        if path.name not in _KNOWN_FILES:
            ledger.append(LedgerEntry(path.name, 0, "unrecognized category file"))

    return DeviceDump(
        dump_id=str(manifest["dump_id"]),
        collected_at=collected_at,
        zone_offset_minutes=zone_offset,
        tool_name=str(manifest.get("tool_name", "")),
        tool_version=str(manifest.get("tool_version", "")),
        device=_build_profile(first_info, first_state),
        records=tuple(records),
        ledger=tuple(ledger),
        line_counts=line_counts,
    )


def _provenance(record: EvidenceRecord) -> tuple[str, int]:
    return record.attributes.get("_file", "?"), int(record.attributes.get("_line", "0"))


def parse_app_inventory(
    dump: DeviceDump, ledger: Optional[list[LedgerEntry]] = None
) -> list[AppRecord]:
    """Type the installed-app records, one AppRecord per inventory line.

    Lines with an unknown status value are ledgered and skipped.
    """
    apps: list[AppRecord] = []
    for record in dump.records:
        if record.category is not ArtifactCategory.INSTALLED_APP:
            continue
        file_name, line_no = _provenance(record)
        status_text = record.attributes.get("status", "")
        status = _STATUS_BY_KEY.get(status_text.lower())
        if status is None:
            if ledger is not None:
                ledger.append(
                    LedgerEntry(file_name, line_no, f"unknown app status {status_text!r}")
                )
            continue
        name = record.attributes.get("name", "")
        if not name:
            if ledger is not None:
                ledger.append(LedgerEntry(file_name, line_no, "app record without a name"))
            continue
        apps.append(
            AppRecord(
                app_name=name,
                status=status,
                package=record.attributes.get("package"),
                installed_at=record.timestamp,
                record_id=record.record_id,
            )
        )
    return apps


def parse_comm_artifacts(
    dump: DeviceDump, ledger: Optional[list[LedgerEntry]] = None
) -> tuple[list[MessageRecord], list[CallRecord], list[ContactRecord]]:
    """Type the communication artifacts: messages, calls, contacts."""

    def note(record: EvidenceRecord, message: str) -> None:
        if ledger is not None:
            file_name, line_no = _provenance(record)
            ledger.append(LedgerEntry(file_name, line_no, message))

    messages: list[MessageRecord] = []
    calls: list[CallRecord] = []
    contacts: list[ContactRecord] = []
    for record in dump.records:
        attrs = record.attributes
        if record.category is ArtifactCategory.MESSAGE:
            direction_text = attrs.get("direction")
            if direction_text is None:
                direction = Direction.INCOMING
                note(record, "message without direction, defaulting to Incoming")
            else:
                parsed = _DIRECTION_BY_KEY.get(direction_text.lower())
                if parsed is None:
                    note(record, f"unknown message direction {direction_text!r}")
                    continue
                direction = parsed
            messages.append(
                MessageRecord(
                    peer_number=attrs.get("peer", ""),
                    body=attrs.get("body", ""),
                    direction=direction,
                    delivered_at=record.timestamp,
                    record_id=record.record_id,
                )
            )
        elif record.category is ArtifactCategory.CALL_RECORD:
            direction = _DIRECTION_BY_KEY.get(attrs.get("direction", "").lower())
            if direction is None:
                note(record, f"unknown call direction {attrs.get('direction')!r}")
                continue
            if record.timestamp is None:
                note(record, "call record without a timestamp")
                continue
            duration: Optional[int] = None
            if "duration_s" in attrs:
                try:
                    duration = int(attrs["duration_s"])
                except ValueError:
                    note(record, f"bad call duration {attrs['duration_s']!r}")
                    continue
            calls.append(
                CallRecord(
                    peer_number=attrs.get("peer", ""),
                    at=record.timestamp,
                    direction=direction,
                    duration_s=duration,
                    record_id=record.record_id,
                )
            )
        elif record.category is ArtifactCategory.CONTACT:
            numbers: tuple[str, ...] = ()
            if "numbers" in attrs:
                try:
                    decoded = json.loads(attrs["numbers"])
                except json.JSONDecodeError:
                    decoded = None
                if not isinstance(decoded, list) or not all(
                    isinstance(n, str) for n in decoded
                ):
                    note(record, "contact numbers must be a JSON list of strings")
                    continue
                numbers = tuple(decoded)
            contacts.append(
                ContactRecord(
                    display_name=attrs.get("name", ""),
                    numbers=numbers,
                    record_id=record.record_id,
                )
            )
    return messages, calls, contacts


def parse_email_accounts(dump: DeviceDump) -> list[EmailAccountRecord]:
    """Configured email and phone-number accounts on the device."""
    accounts = []
    for record in dump.records:
        if record.category is ArtifactCategory.CONFIGURED_EMAIL:
            address = record.attributes.get("address_or_number", "")
            if address:
                accounts.append(
                    EmailAccountRecord(address_or_number=address, record_id=record.record_id)
                )
    return accounts


def ingest_cloud_log(
    path: Path | str, ledger: Optional[list[LedgerEntry]] = None
) -> list[CloudEvent]:
    """Parse a cloud event log (JSON Lines, one event per line).

    Events keep file order. Unknown kinds and malformed lines are
    ledgered and skipped; a duplicated event id is fatal.
    """
    log_path = Path(path)
    file_name = log_path.name
    events: list[CloudEvent] = []
    seen: dict[str, int] = {}

    def note(line_no: int, message: str) -> None:
        if ledger is not None:
            ledger.append(LedgerEntry(file_name, line_no, message))

    for line_no, line in enumerate(
        log_path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        try:
            fields = json.loads(line)
        except json.JSONDecodeError as exc:
            note(line_no, f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(fields, dict):
            note(line_no, "line is not a JSON object")
            continue
        event_id = fields.get("id")
        if not isinstance(event_id, str) or not event_id:
            note(line_no, "event without an id")
            continue
        kind_text = fields.get("kind")
        kind = _KIND_BY_KEY.get(kind_text.lower()) if isinstance(kind_text, str) else None
        if kind is None:
            note(line_no, f"unknown event kind {kind_text!r}")
            continue
        raw_ts = fields.get("ts")
        if not isinstance(raw_ts, str):
            note(line_no, "event without a ts timestamp")
            continue
        try:
            timestamp = normalize_timestamp(raw_ts, Locale.DAY_FIRST, 0)
        except (UnparseableTimestamp, ImpossibleDate) as exc:
            note(line_no, f"bad ts: {exc}")
            continue
        digest: Optional[Digest256] = None
        if fields.get("digest") is not None:
            try:
                digest = Digest256.from_hex(str(fields["digest"]))
            except ValueError:
                note(line_no, f"bad content digest {fields['digest']!r}")
                continue
        size: Optional[int] = None
        if fields.get("size") is not None:
            try:
                size = int(fields["size"])
            except (TypeError, ValueError):
                note(line_no, f"bad size {fields['size']!r}")
                continue
        if event_id in seen:
            raise DuplicateEventId(
                f"event id {event_id!r} on line {line_no} already used on line {seen[event_id]}"
            )
        seen[event_id] = line_no
        events.append(
            CloudEvent(
                event_id=event_id,
                kind=kind,
                timestamp=timestamp,
                account=str(fields.get("account", "")),
                package_or_object=str(fields.get("object", "")),
                content_digest=digest,
                size_bytes=size,
            )
        )
    return events


def dump_to_json_dict(dump: DeviceDump) -> dict:
    """Stable JSON form of an ingested dump, byte-deterministic once encoded."""
    profile = dump.device
    return {
        "dump_id": dump.dump_id,
        "collected_at": dump.collected_at.original_text,
        "zone_offset_minutes": dump.zone_offset_minutes,
        "tool_name": dump.tool_name,
        "tool_version": dump.tool_version,
        "device": {
            "model": profile.model,
            "device_name": profile.device_name,
            "android_version": profile.android_version,
            "sdk_level": profile.sdk_level,
            "brand": profile.brand,
            "manufacturer": profile.manufacturer,
            "kernel_name": profile.kernel_name,
            "wifi_mac": profile.wifi_mac,
            "wifi_ssid": profile.wifi_ssid,
            "bluetooth_mac": profile.bluetooth_mac,
            "imei": profile.imei,
            "developer_option_enabled": profile.developer_option_enabled,
            "encryption_enabled": profile.encryption_enabled,
            "flight_mode_on": profile.flight_mode_on,
            "screen_lock_enabled": profile.screen_lock_enabled,
            "screen_saver_enabled": profile.screen_saver_enabled,
            "battery_percent": profile.battery_percent,
            "device_clock_at_acquisition": (
                profile.device_clock_at_acquisition.original_text
                if profile.device_clock_at_acquisition
                else None
            ),
        },
        "records": [
            {
                "record_id": r.record_id,
                "category": r.category.value,
                "timestamp": r.timestamp.original_text if r.timestamp else None,
                "timestamp_utc": r.timestamp.to_iso() if r.timestamp else None,
                "source": r.source.value,
                "attributes": dict(r.attributes),
                "digest": r.digest.hex(),
            }
            for r in dump.records
        ],
        "ledger": [
            {"file": e.file, "line": e.line, "message": e.message} for e in dump.ledger
        ],
        "line_counts": dict(dump.line_counts),
    }
