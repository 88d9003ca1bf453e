"""Canonical evidence model.

Typed artifact records, timestamp normalization, and the deterministic
byte encoding that every digest and hash chain in the tool is computed
over. All types here are immutable; operations are pure functions.
"""

from __future__ import annotations

import calendar
import hashlib
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

from .errors import ImpossibleDate, UnparseableTimestamp

# Canonical encoding separators. Evidence fields must never contain them;
# this is what makes the encoding injective and therefore safe to hash.
FIELD_SEP = b"\x1f"
RECORD_TERM = b"\x1e"
_FORBIDDEN = ("\x1f", "\x1e")

# Epoch bounds for 1970-01-01T00:00:00Z .. 2100-12-31T23:59:59Z.
EPOCH_MIN = 0
EPOCH_MAX = 4133980799

DIGEST_ALGORITHM = "sha-256"

_ISO_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(Z|[+-]\d{2}:\d{2})$"
)
_LEGACY_RE = re.compile(
    r"^(\d{1,2})/(\d{1,2})/(\d{4}) (\d{1,2}):(\d{2}):(\d{2}) (AM|PM)$"
)

_DAYS_IN_MONTH = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)


class Locale(Enum):
    """Reading order for legacy DD/MM vs MM/DD timestamps."""

    DAY_FIRST = "day-first"
    MONTH_FIRST = "month-first"


class Source(Enum):
    DEVICE = "Device"
    CLOUD = "Cloud"


class ArtifactCategory(Enum):
    DEVICE_INFO = "DeviceInfo"
    PHONE_STATE = "PhoneState"
    CONFIGURED_EMAIL = "ConfiguredEmail"
    INSTALLED_APP = "InstalledApp"
    BROWSER_HISTORY = "BrowserHistory"
    RUNNING_APP = "RunningApp"
    WIFI_HISTORY = "WifiHistory"
    SIM_CARD = "SimCard"
    CONTACT = "Contact"
    MESSAGE = "Message"
    CALL_RECORD = "CallRecord"
    CLOUD_EVENT = "CloudEvent"


@dataclass(frozen=True)
class UtcTimestamp:
    """A UTC instant plus the exact source text it was read from."""

    seconds_since_epoch: int
    original_text: str

    def __post_init__(self) -> None:
        if not (EPOCH_MIN <= self.seconds_since_epoch <= EPOCH_MAX):
            raise ImpossibleDate(
                f"timestamp {self.seconds_since_epoch} outside supported range 1970-2100"
            )
        if not self.original_text:
            raise ValueError("original_text must be preserved, got empty string")
        _check_clean(self.original_text, "timestamp text")

    def to_iso(self) -> str:
        """Render as YYYY-MM-DDTHH:MM:SSZ."""
        return epoch_to_iso(self.seconds_since_epoch)


@dataclass(frozen=True)
class Digest256:
    """A 32-byte digest; renders as 64 lowercase hex characters."""

    value: bytes

    def __post_init__(self) -> None:
        if len(self.value) != 32:
            raise ValueError(f"digest must be 32 bytes, got {len(self.value)}")

    @classmethod
    def from_hex(cls, text: str) -> "Digest256":
        return cls(bytes.fromhex(text))

    def hex(self) -> str:
        return self.value.hex()


@dataclass(frozen=True)
class EvidenceRecord:
    """One typed, timestamped artifact entry with provenance and digest.

    ``attributes`` preserves source order; the digest is computed over the
    canonical encoding at construction time and can never drift from the
    record contents.
    """

    record_id: str
    category: ArtifactCategory
    timestamp: Optional[UtcTimestamp]
    attributes: Mapping[str, str]
    source: Source
    digest: Digest256 = field(init=False, compare=True)

    def __post_init__(self) -> None:
        if not self.record_id:
            raise ValueError("record_id must be nonempty")
        _check_clean(self.record_id, "record_id")
        for key, value in self.attributes.items():
            if not isinstance(key, str) or not key:
                raise ValueError("attribute keys must be nonempty strings")
            if not isinstance(value, str):
                raise ValueError(f"attribute {key!r} value must be a string")
            _check_clean(key, f"attribute key {key!r}")
            _check_clean(value, f"attribute value for {key!r}")
        object.__setattr__(self, "attributes", dict(self.attributes))
        object.__setattr__(self, "digest", record_digest(self))


def _check_clean(text: str, what: str) -> None:
    for mark in _FORBIDDEN:
        if mark in text:
            raise ValueError(f"{what} contains reserved separator byte {mark!r}")


def canonical_encode(record: EvidenceRecord) -> bytes:
    """Deterministic UTF-8 encoding of a record.

    Field order is fixed: record id, category, timestamp source text
    (empty when undated), source, then attributes as key/value fields
    sorted by key. Fields are joined with 0x1f and the record ends with
    0x1e. Attribute insertion order therefore never affects the bytes.
    """
    fields = [
        record.record_id,
        record.category.value,
        record.timestamp.original_text if record.timestamp else "",
        record.source.value,
    ]
    for key in sorted(record.attributes):
        fields.append(key)
        fields.append(record.attributes[key])
    return FIELD_SEP.join(f.encode("utf-8") for f in fields) + RECORD_TERM


def record_digest(record: EvidenceRecord) -> Digest256:
    """SHA-256 over the canonical encoding."""
    return Digest256(hashlib.sha256(canonical_encode(record)).digest())


def normalize_timestamp(raw: str, locale: Locale, zone_offset_minutes: int) -> UtcTimestamp:
    """Parse a source timestamp into UTC, preserving the raw text.

    Two grammars are accepted: ISO-8601 with an explicit zone
    (``YYYY-MM-DDThh:mm:ssZ`` or ``...+HH:MM``), which ignores both the
    locale flag and ``zone_offset_minutes``, and the legacy
    ``DD/MM/YYYY hh:mm:ss AM/PM`` form, read day-first or month-first per
    the locale and shifted from the dump's zone offset into UTC.
    """
    m = _ISO_RE.match(raw)
    if m:
        year, month, day, hour, minute, second = (int(g) for g in m.groups()[:6])
        zone = m.group(7)
        _validate_civil(year, month, day, hour, minute, second)
        epoch = _epoch_from_civil(year, month, day, hour, minute, second)
        if zone != "Z":
            sign = 1 if zone[0] == "+" else -1
            epoch -= sign * (int(zone[1:3]) * 3600 + int(zone[4:6]) * 60)
        return UtcTimestamp(epoch, raw)

    m = _LEGACY_RE.match(raw)
    if m:
        first, second_field, year = int(m.group(1)), int(m.group(2)), int(m.group(3))
        hour12, minute, second = int(m.group(4)), int(m.group(5)), int(m.group(6))
        meridiem = m.group(7)
        if locale is Locale.DAY_FIRST:
            day, month = first, second_field
        else:
            month, day = first, second_field
        if not 1 <= hour12 <= 12:
            raise ImpossibleDate(f"hour {hour12} invalid for 12-hour clock in {raw!r}")
        hour = hour12 % 12 + (12 if meridiem == "PM" else 0)
        _validate_civil(year, month, day, hour, minute, second)
        epoch = _epoch_from_civil(year, month, day, hour, minute, second)
        epoch -= zone_offset_minutes * 60
        return UtcTimestamp(epoch, raw)

    raise UnparseableTimestamp(f"timestamp {raw!r} matches no supported grammar")


def _validate_civil(
    year: int, month: int, day: int, hour: int, minute: int, second: int
) -> None:
    if not 1970 <= year <= 2100:
        raise ImpossibleDate(f"year {year} outside supported range 1970-2100")
    if not 1 <= month <= 12:
        raise ImpossibleDate(f"month {month} does not exist")
    if not 1 <= day <= _month_length(year, month):
        raise ImpossibleDate(f"day {day} does not exist in {year}-{month:02d}")
    if hour > 23 or minute > 59 or second > 59:
        raise ImpossibleDate(f"time {hour:02d}:{minute:02d}:{second:02d} out of range")


def _month_length(year: int, month: int) -> int:
    if month == 2 and calendar.isleap(year):
        return 29
    return _DAYS_IN_MONTH[month - 1]


def _epoch_from_civil(
    year: int, month: int, day: int, hour: int, minute: int, second: int
) -> int:
    return calendar.timegm((year, month, day, hour, minute, second, 0, 0, 0))


def epoch_to_iso(epoch: int) -> str:
    """Render UTC epoch seconds as YYYY-MM-DDTHH:MM:SSZ."""
    y, mo, d, h, mi, s = civil_from_epoch(epoch)
    return f"{y:04d}-{mo:02d}-{d:02d}T{h:02d}:{mi:02d}:{s:02d}Z"


def civil_from_epoch(epoch: int) -> tuple[int, int, int, int, int, int]:
    """UTC epoch seconds to (year, month, day, hour, minute, second)."""
    days, rem = divmod(epoch, 86400)
    hour, rem = divmod(rem, 3600)
    minute, second = divmod(rem, 60)
    year = 1970
    while True:
        length = 366 if calendar.isleap(year) else 365
        if days < length:
            break
        days -= length
        year += 1
    month = 1
    while days >= _month_length(year, month):
        days -= _month_length(year, month)
        month += 1
    return year, month, days + 1, hour, minute, second
