"""Chain of custody over ingested records.

Sealing computes a linked SHA-256 chain across the record sequence so
later verification can not only detect a modified dump but point at the
first record index where it diverges. Diffing compares two acquisitions
of the same device record-by-record.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from .acquisition import DeviceDump
from .errors import DeviceMismatch, MissingManifest, RecordCountMismatch, UnsupportedAlgorithm
from .evidence import (
    DIGEST_ALGORITHM,
    FIELD_SEP,
    RECORD_TERM,
    Digest256,
    EvidenceRecord,
    Locale,
    UtcTimestamp,
    canonical_encode,
    normalize_timestamp,
)

SEALED_MANIFEST = "manifest.sealed.json"


class IsolationMethod(Enum):
    AIRPLANE_MODE = "AirplaneMode"
    POWERED_OFF = "PoweredOff"
    SHIELDED_CONTAINER = "ShieldedContainer"
    RADIO_ISOLATION = "RadioIsolation"
    NONE = "None"


class Verdict(Enum):
    INTACT = "Intact"
    TAMPERED = "Tampered"


@dataclass(frozen=True)
class AcquisitionManifest:
    """Custody envelope over an ordered record set.

    ``record_links`` holds the running chain value after each record, so
    tampering can be localized to an index during verification.
    """

    dump_id: str
    collected_at: UtcTimestamp
    examiner: str
    isolation_method: IsolationMethod
    digest_algorithm: str
    record_count: int
    chain_head: Digest256
    record_links: tuple[Digest256, ...]


@dataclass(frozen=True)
class VerificationReport:
    verdict: Verdict
    first_divergent_index: Optional[int] = None
    expected: Optional[Digest256] = None
    actual: Optional[Digest256] = None


@dataclass(frozen=True)
class AcquisitionDiff:
    added: tuple[str, ...]
    removed: tuple[str, ...]
    changed: tuple[str, ...]
    identical_count: int


def manifest_header_bytes(
    dump_id: str, collected_at_iso: str, examiner: str, digest_algorithm: str
) -> bytes:
    """Fixed header encoding that anchors the chain, same field rules as records."""
    fields = (dump_id, collected_at_iso, examiner, digest_algorithm)
    return FIELD_SEP.join(f.encode("utf-8") for f in fields) + RECORD_TERM


def chain_digest(
    manifest_header: bytes, records: Sequence[EvidenceRecord]
) -> tuple[Digest256, list[Digest256]]:
    """Linked hash chain over the record sequence.

    The anchor is the digest of the header bytes; each link hashes the
    previous link concatenated with the record's canonical encoding.
    Returns the chain head and one link per record, in order.
    """
    current = hashlib.sha256(manifest_header).digest()
    links: list[Digest256] = []
    for record in records:
        current = hashlib.sha256(current + canonical_encode(record)).digest()
        links.append(Digest256(current))
    return Digest256(current), links


def seal_dump(
    dump: DeviceDump,
    examiner: str = "unknown",
    isolation_method: IsolationMethod = IsolationMethod.NONE,
) -> AcquisitionManifest:
    """Compute the chain over a dump's records and wrap it in a manifest."""
    header = manifest_header_bytes(
        dump.dump_id, dump.collected_at.to_iso(), examiner, DIGEST_ALGORITHM
    )
    head, links = chain_digest(header, dump.records)
    return AcquisitionManifest(
        dump_id=dump.dump_id,
        collected_at=dump.collected_at,
        examiner=examiner,
        isolation_method=isolation_method,
        digest_algorithm=DIGEST_ALGORITHM,
        record_count=len(dump.records),
        chain_head=head,
        record_links=tuple(links),
    )


def verify_chain(
    manifest: AcquisitionManifest, records: Sequence[EvidenceRecord]
) -> VerificationReport:
    """Recompute the chain and compare it to a sealed manifest.

    Intact means the recomputed head equals the sealed head. On any
    mismatch the report carries the smallest record index whose
    recomputed link differs from the stored one, with the expected and
    actual digests at that index.
    """
    if manifest.digest_algorithm != DIGEST_ALGORITHM:
        raise UnsupportedAlgorithm(
            f"cannot verify algorithm {manifest.digest_algorithm!r}, only {DIGEST_ALGORITHM}"
        )
    if manifest.record_count != len(records):
        raise RecordCountMismatch(
            f"manifest sealed {manifest.record_count} records, got {len(records)}"
        )
    if len(manifest.record_links) != manifest.record_count:
        raise RecordCountMismatch(
            f"manifest stores {len(manifest.record_links)} links "
            f"for {manifest.record_count} records"
        )

    header = manifest_header_bytes(
        manifest.dump_id,
        manifest.collected_at.to_iso(),
        manifest.examiner,
        manifest.digest_algorithm,
    )
    head, links = chain_digest(header, records)
    if head == manifest.chain_head:
        return VerificationReport(verdict=Verdict.INTACT)
    for index, (stored, recomputed) in enumerate(zip(manifest.record_links, links)):
        if stored != recomputed:
            return VerificationReport(
                verdict=Verdict.TAMPERED,
                first_divergent_index=index,
                expected=stored,
                actual=recomputed,
            )
    # Head mismatch with no divergent link means the sealed head itself
    # was altered; the earliest suspect index is 0.
    return VerificationReport(
        verdict=Verdict.TAMPERED,
        first_divergent_index=0,
        expected=manifest.chain_head,
        actual=head,
    )


def diff_acquisitions(
    a: DeviceDump, b: DeviceDump, allow_device_mismatch: bool = False
) -> AcquisitionDiff:
    """Compare two acquisitions record-by-record, matched on record id.

    Both dumps must claim the same device (equal IMEI) unless the
    override flag is set. ``changed`` lists ids present in both whose
    digests differ.
    """
    imei_a = a.device.imei
    imei_b = b.device.imei
    if not allow_device_mismatch and (imei_a is None or imei_a != imei_b):
        raise DeviceMismatch(
            f"dumps claim different devices (imei {imei_a!r} vs {imei_b!r}); "
            "pass the override flag to diff anyway"
        )
    by_id_a = {r.record_id: r for r in a.records}
    by_id_b = {r.record_id: r for r in b.records}
    added = sorted(set(by_id_b) - set(by_id_a))
    removed = sorted(set(by_id_a) - set(by_id_b))
    changed = sorted(
        rid
        for rid in set(by_id_a) & set(by_id_b)
        if by_id_a[rid].digest != by_id_b[rid].digest
    )
    identical = len(set(by_id_a) & set(by_id_b)) - len(changed)
    return AcquisitionDiff(
        added=tuple(added),
        removed=tuple(removed),
        changed=tuple(changed),
        identical_count=identical,
    )


def write_sealed_manifest(manifest: AcquisitionManifest, bundle_path: Path | str) -> Path:
    """Write manifest.sealed.json beside the bundle's category files."""
    path = Path(bundle_path) / SEALED_MANIFEST
    payload = {
        "dump_id": manifest.dump_id,
        "collected_at": manifest.collected_at.to_iso(),
        "examiner": manifest.examiner,
        "isolation_method": manifest.isolation_method.value,
        "digest_algorithm": manifest.digest_algorithm,
        "record_count": manifest.record_count,
        "chain_head": manifest.chain_head.hex(),
        "record_links": [link.hex() for link in manifest.record_links],
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


def load_sealed_manifest(bundle_path: Path | str) -> AcquisitionManifest:
    path = Path(bundle_path) / SEALED_MANIFEST
    if not path.is_file():
        raise MissingManifest(f"no {SEALED_MANIFEST} in {bundle_path}; seal the bundle first")
    data = json.loads(path.read_text(encoding="utf-8"))
    collected = normalize_timestamp(data["collected_at"], Locale.DAY_FIRST, 0)
    return AcquisitionManifest(
        dump_id=data["dump_id"],
        collected_at=collected,
        examiner=data["examiner"],
        isolation_method=IsolationMethod(data["isolation_method"]),
        digest_algorithm=data["digest_algorithm"],
        record_count=int(data["record_count"]),
        chain_head=Digest256.from_hex(data["chain_head"]),
        record_links=tuple(Digest256.from_hex(h) for h in data["record_links"]),
    )
