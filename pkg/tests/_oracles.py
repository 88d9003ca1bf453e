"""Independent reference implementations used as test oracles.

Everything here is deliberately written from scratch against the same
rules as the production code, without importing its internals, so a
shared bug cannot hide on both sides of an assertion.
"""

from __future__ import annotations


def civil_to_epoch(y: int, mo: int, d: int, h: int, mi: int, s: int) -> int:
    """Epoch seconds from a UTC civil time, via the days-from-civil algorithm."""
    y -= mo <= 2
    era = (y if y >= 0 else y - 399) // 400
    yoe = y - era * 400
    doy = (153 * (mo + (-3 if mo > 2 else 9)) + 2) // 5 + d - 1
    doe = yoe * 365 + yoe // 4 - yoe // 100 + doy
    days = era * 146097 + doe - 719468
    return days * 86400 + h * 3600 + mi * 60 + s


def reference_encode(record) -> bytes:
    """Hand-rolled canonical record encoding over the same field rules."""
    out = bytearray()
    out += record.record_id.encode("utf-8")
    out += b"\x1f"
    out += record.category.value.encode("utf-8")
    out += b"\x1f"
    if record.timestamp is not None:
        out += record.timestamp.original_text.encode("utf-8")
    out += b"\x1f"
    out += record.source.value.encode("utf-8")
    for key in sorted(record.attributes.keys()):
        out += b"\x1f"
        out += key.encode("utf-8")
        out += b"\x1f"
        out += record.attributes[key].encode("utf-8")
    out += b"\x1e"
    return bytes(out)


def lower_median(values) -> int:
    ordered = sorted(values)
    if not ordered:
        raise ValueError("no values")
    return ordered[(len(ordered) - 1) // 2]


def brute_force_match(device_records, cloud_events, offset_seconds, window_seconds):
    """Exhaustive greedy assignment under the published matching rules.

    Recomputes the full candidate set and picks the global minimum on
    every step, with no indexing shortcuts. Returns tuples of
    (record_id, event_id, tier_name, delta).
    """

    def digest_of(record):
        raw = record.attributes.get("content_digest")
        return raw.strip().lower() if raw and raw.strip() else None

    def delta_of(record, event):
        if record.timestamp is None:
            return None
        return (
            event.timestamp.seconds_since_epoch
            - offset_seconds
            - record.timestamp.seconds_since_epoch
        )

    used_r: set[str] = set()
    used_e: set[str] = set()
    links = []

    # Tier 1: equal content digests, smallest corrected gap first.
    while True:
        best = None
        for record in device_records:
            if record.record_id in used_r or digest_of(record) is None:
                continue
            for event in cloud_events:
                if event.event_id in used_e or event.content_digest is None:
                    continue
                if digest_of(record) != event.content_digest.hex():
                    continue
                delta = delta_of(record, event)
                rank = (
                    (1, 0, record.record_id, event.event_id)
                    if delta is None
                    else (0, abs(delta), record.record_id, event.event_id)
                )
                if best is None or rank < best[0]:
                    best = (rank, record.record_id, event.event_id, delta)
        if best is None:
            break
        used_r.add(best[1])
        used_e.add(best[2])
        links.append((best[1], best[2], "ExactDigest", best[3]))

    # Tier 2: same object name, equal size when both present, gap in window.
    while True:
        best = None
        for record in device_records:
            if record.record_id in used_r:
                continue
            name = record.attributes.get("object")
            if not name:
                continue
            raw_size = record.attributes.get("size_bytes")
            try:
                size = int(raw_size) if raw_size is not None else None
            except ValueError:
                size = None
            for event in cloud_events:
                if event.event_id in used_e:
                    continue
                if event.package_or_object != name:
                    continue
                if size is not None and event.size_bytes is not None and size != event.size_bytes:
                    continue
                delta = delta_of(record, event)
                if delta is None or abs(delta) > window_seconds:
                    continue
                rank = (abs(delta), record.record_id, event.event_id)
                if best is None or rank < best[0]:
                    best = (rank, record.record_id, event.event_id, delta)
        if best is None:
            break
        used_r.add(best[1])
        used_e.add(best[2])
        links.append((best[1], best[2], "MetadataWindow", best[3]))

    links.sort(key=lambda l: (0 if l[2] == "ExactDigest" else 1, l[0]))
    return links


def linear_scan_geo(rows, ip_value: int):
    """Linear scan over (start, end, country, city) rows."""
    for start, end, country, city in rows:
        if start <= ip_value <= end:
            return country, city
    return None
