"""Offline open-source-intelligence enrichment.

Builds an identity graph from the identifiers found in communication
artifacts and resolves IP addresses against a bundled range table.
Nothing here touches the network; results must be reproducible in
court, so only local lookup data participates.
"""

from __future__ import annotations

import csv
import ipaddress
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence
from bisect import bisect_right

from .acquisition import CallRecord, ContactRecord, EmailAccountRecord, MessageRecord
from .errors import MalformedTable


class IdKind(Enum):
    PHONE = "Phone"
    EMAIL = "Email"


@dataclass(frozen=True)
class Identifier:
    kind: IdKind
    value: str


@dataclass(frozen=True)
class IdentityGraph:
    """Co-occurrence graph over normalized identifiers.

    Edge keys are unordered pairs stored in canonical (sorted) order;
    the count says in how many artifacts both endpoints appeared.
    """

    nodes: frozenset[Identifier]
    edges: Mapping[tuple[Identifier, Identifier], int]


@dataclass(frozen=True)
class GeoRecord:
    ip: str
    country: str
    city: str
    source_table: str


@dataclass(frozen=True)
class GeoTable:
    """Sorted, non-overlapping IPv4 ranges with country and city labels."""

    name: str
    starts: tuple[int, ...]
    ends: tuple[int, ...]
    labels: tuple[tuple[str, str], ...]


def normalize_identifier(raw: str) -> Optional[Identifier]:
    """Normalize one identifier: emails lowercase, phones digits-only.

    A leading ``+`` on a phone number is kept; no country code is ever
    inferred. Returns None when nothing usable remains.
    """
    text = raw.strip()
    if not text:
        return None
    if "@" in text:
        return Identifier(IdKind.EMAIL, text.lower())
    digits = "".join(ch for ch in text if ch.isdigit())
    if not digits:
        return None
    if text.startswith("+"):
        digits = "+" + digits
    return Identifier(IdKind.PHONE, digits)


def _edge_key(a: Identifier, b: Identifier) -> tuple[Identifier, Identifier]:
    ka = (a.kind.value, a.value)
    kb = (b.kind.value, b.value)
    return (a, b) if ka <= kb else (b, a)


def build_identity_graph(
    contacts: Sequence[ContactRecord],
    messages: Sequence[MessageRecord],
    calls: Sequence[CallRecord],
    configured_emails: Sequence[EmailAccountRecord],
) -> IdentityGraph:
    """Connect identifiers that co-occur in one artifact.

    A contact ties its own numbers together; each message or call ties
    the peer to every account configured on the device. Construction is
    order-independent, so permuting the input artifacts cannot change
    the graph.
    """
    nodes: set[Identifier] = set()
    edges: dict[tuple[Identifier, Identifier], int] = {}

    def add_artifact(identifiers: Iterable[Identifier]) -> None:
        group = sorted(set(identifiers), key=lambda i: (i.kind.value, i.value))
        nodes.update(group)
        for index, first in enumerate(group):
            for second in group[index + 1 :]:
                key = _edge_key(first, second)
                edges[key] = edges.get(key, 0) + 1

    owners = []
    for account in configured_emails:
        owner = normalize_identifier(account.address_or_number)
        if owner is not None:
            owners.append(owner)
            nodes.add(owner)

    for contact in contacts:
        found = [normalize_identifier(number) for number in contact.numbers]
        add_artifact(i for i in found if i is not None)

    for message in messages:
        peer = normalize_identifier(message.peer_number)
        if peer is not None:
            add_artifact([peer, *owners])
    for call in calls:
        peer = normalize_identifier(call.peer_number)
        if peer is not None:
            add_artifact([peer, *owners])

    return IdentityGraph(nodes=frozenset(nodes), edges=edges)


def load_geo_table(path: Path | str) -> GeoTable:
    """Load a CSV of (range_start_ip, range_end_ip, country, city) rows.

    Rows must already be sorted by range start and must not overlap;
    violations raise MalformedTable at load so later lookups can trust
    binary search.
    """
    table_path = Path(path)
    starts: list[int] = []
    ends: list[int] = []
    labels: list[tuple[str, str]] = []
    with open(table_path, newline="", encoding="utf-8") as handle:
        for row_no, row in enumerate(csv.reader(handle), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) < 4:
                raise MalformedTable(f"{table_path}:{row_no}: need 4 columns, got {len(row)}")
            try:
                start = int(ipaddress.IPv4Address(row[0].strip()))
                end = int(ipaddress.IPv4Address(row[1].strip()))
            except ipaddress.AddressValueError as exc:
                raise MalformedTable(f"{table_path}:{row_no}: {exc}") from exc
            if end < start:
                raise MalformedTable(f"{table_path}:{row_no}: range end precedes start")
            if starts and start <= ends[-1]:
                raise MalformedTable(
                    f"{table_path}:{row_no}: ranges must be sorted and non-overlapping"
                )
            starts.append(start)
            ends.append(end)
            labels.append((row[2].strip(), row[3].strip()))
    return GeoTable(
        name=table_path.name, starts=tuple(starts), ends=tuple(ends), labels=tuple(labels)
    )


def resolve_ip(ip: str, geo_table: GeoTable) -> Optional[GeoRecord]:
    """Binary-search the range table; a miss is an absent result, not an error."""
    try:
        value = int(ipaddress.IPv4Address(ip.strip()))
    except ipaddress.AddressValueError:
        return None
    index = bisect_right(geo_table.starts, value) - 1
    if index < 0 or value > geo_table.ends[index]:
        return None
    country, city = geo_table.labels[index]
    return GeoRecord(ip=ip.strip(), country=country, city=city, source_table=geo_table.name)
