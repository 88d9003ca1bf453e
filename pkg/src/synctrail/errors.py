"""Exception hierarchy shared by every stage of the pipeline.

Fatal errors are reserved for conditions that would corrupt custody
(identity collisions, missing manifests, unverifiable chains). Anything
recoverable is recorded in an error ledger instead of raised.
"""

from __future__ import annotations


class ForensicsError(Exception):
    """Base class for all tool-specific failures."""


class UnparseableTimestamp(ForensicsError):
    """Raw timestamp text matches neither supported grammar."""


class ImpossibleDate(ForensicsError):
    """Timestamp text parsed but names a date that cannot exist."""


class MissingManifest(ForensicsError):
    """Bundle directory lacks a readable manifest.json."""


class DuplicateRecordId(ForensicsError):
    """Two records in one dump claim the same record id."""


class DuplicateEventId(ForensicsError):
    """Two cloud log lines claim the same event id."""


class RecordCountMismatch(ForensicsError):
    """Sealed record count disagrees with the records presented."""


class UnsupportedAlgorithm(ForensicsError):
    """Sealed manifest names a digest algorithm this tool cannot verify."""


class DeviceMismatch(ForensicsError):
    """Two acquisitions do not claim the same device and no override was given."""


class InsufficientSupport(ForensicsError):
    """Too few digest-matched pairs to estimate clock skew."""


class MalformedTable(ForensicsError):
    """Geolocation range table is unsorted or has overlapping ranges."""


class EmptyBundle(ForensicsError):
    """Operation needs at least one record but the bundle has none."""


class IoFailure(ForensicsError):
    """Filesystem write or read failed while emitting a case."""
