from __future__ import annotations

import hashlib
import json
import shutil
import subprocess

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synctrail.acquisition import ingest_device_dump
from synctrail.errors import DeviceMismatch, RecordCountMismatch, UnsupportedAlgorithm
from synctrail.evidence import (
    ArtifactCategory,
    EvidenceRecord,
    Source,
    canonical_encode,
)
from synctrail.preservation import (
    AcquisitionManifest,
    IsolationMethod,
    Verdict,
    chain_digest,
    diff_acquisitions,
    load_sealed_manifest,
    manifest_header_bytes,
    seal_dump,
    verify_chain,
    write_sealed_manifest,
)
from synctrail.simulator import SimParams, generate_case


def record(rid: str, **attrs: str) -> EvidenceRecord:
    return EvidenceRecord(
        record_id=rid,
        category=ArtifactCategory.MESSAGE,
        timestamp=None,
        attributes=attrs,
        source=Source.DEVICE,
    )


HEADER = manifest_header_bytes("d-1", "2016-05-12T10:00:00Z", "jdoe", "sha-256")


def mutate_record(original: EvidenceRecord, key: str, position: int) -> EvidenceRecord:
    value = original.attributes[key]
    flipped = "x" if value[position] != "x" else "y"
    attrs = dict(original.attributes)
    attrs[key] = value[:position] + flipped + value[position + 1 :]
    return EvidenceRecord(
        record_id=original.record_id,
        category=original.category,
        timestamp=original.timestamp,
        attributes=attrs,
        source=original.source,
    )


class TestChainDigest:
    def test_empty_chain_is_header_digest(self):
        head, links = chain_digest(HEADER, [])
        assert links == []
        assert head.value == hashlib.sha256(HEADER).digest()

    def test_single_record_against_external_tool(self, tmp_path):
        tool = shutil.which("sha256sum")
        assert tool
        r = record("r1", body="hello")
        head, links = chain_digest(HEADER, [r])
        h0 = hashlib.sha256(HEADER).digest()
        blob = tmp_path / "link.bin"
        blob.write_bytes(h0 + canonical_encode(r))
        out = subprocess.run([tool, str(blob)], capture_output=True, text=True, check=True)
        assert out.stdout.split()[0] == head.hex() == links[0].hex()

    def test_permutation_changes_head(self):
        a, b = record("r1", k="1"), record("r2", k="2")
        head_ab, _ = chain_digest(HEADER, [a, b])
        head_ba, _ = chain_digest(HEADER, [b, a])
        assert head_ab != head_ba

    def test_links_prefix_property(self):
        records = [record(f"r{i}", k=str(i)) for i in range(5)]
        head, links = chain_digest(HEADER, records)
        assert links[-1] == head
        for n in range(5):
            prefix_head, prefix_links = chain_digest(HEADER, records[:n])
            assert prefix_links == links[:n]


class TestVerifyChain:
    def make_sealed(self, records) -> AcquisitionManifest:
        head, links = chain_digest(HEADER, records)
        from synctrail.evidence import UtcTimestamp

        return AcquisitionManifest(
            dump_id="d-1",
            collected_at=UtcTimestamp(1463047200, "2016-05-12T10:00:00Z"),
            examiner="jdoe",
            isolation_method=IsolationMethod.AIRPLANE_MODE,
            digest_algorithm="sha-256",
            record_count=len(records),
            chain_head=head,
            record_links=tuple(links),
        )

    def test_unmodified_is_intact(self):
        records = [record(f"r{i}", k=str(i)) for i in range(8)]
        report = verify_chain(self.make_sealed(records), records)
        assert report.verdict is Verdict.INTACT
        assert report.first_divergent_index is None
        assert report.expected is None and report.actual is None

    @pytest.mark.parametrize("k", [0, 3, 7])
    def test_flip_localized_to_index(self, k):
        records = [record(f"r{i}", k=f"value-{i}") for i in range(8)]
        manifest = self.make_sealed(records)
        tampered = list(records)
        tampered[k] = mutate_record(records[k], "k", 2)
        report = verify_chain(manifest, tampered)
        assert report.verdict is Verdict.TAMPERED
        assert report.first_divergent_index == k
        assert report.expected is not None and report.actual is not None

    def test_appended_record_is_count_mismatch(self):
        records = [record("r1", k="1")]
        manifest = self.make_sealed(records)
        with pytest.raises(RecordCountMismatch):
            verify_chain(manifest, records + [record("r2", k="2")])

    def test_unsupported_algorithm(self):
        records = [record("r1", k="1")]
        manifest = self.make_sealed(records)
        object.__setattr__(manifest, "digest_algorithm", "md5")
        with pytest.raises(UnsupportedAlgorithm):
            verify_chain(manifest, records)

    @given(data=st.data())
    @settings(max_examples=60, deadline=None)
    def test_tamper_completeness_random_mutations(self, data):
        records = [record(f"r{i}", payload=f"payload-{i:03d}") for i in range(6)]
        manifest = self.make_sealed(records)
        k = data.draw(st.integers(min_value=0, max_value=5))
        pos = data.draw(st.integers(min_value=0, max_value=len("payload-000") - 1))
        tampered = list(records)
        tampered[k] = mutate_record(records[k], "payload", pos)
        report = verify_chain(manifest, tampered)
        assert report.verdict is Verdict.TAMPERED
        assert report.first_divergent_index == k


class TestSealAndLoad:
    def test_round_trip_through_sealed_file(self, tmp_path):
        case = generate_case(SimParams(seed=11, n_uploads=3), tmp_path)
        dump = ingest_device_dump(case.bundle_dir)
        manifest = seal_dump(dump, examiner="jdoe", isolation_method=IsolationMethod.POWERED_OFF)
        path = write_sealed_manifest(manifest, case.bundle_dir)
        assert path.name == "manifest.sealed.json"
        loaded = load_sealed_manifest(case.bundle_dir)
        assert loaded == manifest
        assert verify_chain(loaded, dump.records).verdict is Verdict.INTACT

    def test_sealed_file_carries_hex_fields(self, tmp_path):
        case = generate_case(SimParams(seed=12, n_uploads=1), tmp_path)
        dump = ingest_device_dump(case.bundle_dir)
        write_sealed_manifest(seal_dump(dump), case.bundle_dir)
        data = json.loads((case.bundle_dir / "manifest.sealed.json").read_text())
        assert data["digest_algorithm"] == "sha-256"
        assert len(data["chain_head"]) == 64
        assert len(data["record_links"]) == data["record_count"] == len(dump.records)


class TestDiffAcquisitions:
    def test_reflexive_diff_is_empty(self, tmp_path):
        case = generate_case(SimParams(seed=21), tmp_path)
        dump = ingest_device_dump(case.bundle_dir)
        diff = diff_acquisitions(dump, dump)
        assert diff.added == diff.removed == diff.changed == ()
        assert diff.identical_count == len(dump.records)

    def test_appended_message_shows_as_added(self, tmp_path):
        case = generate_case(SimParams(seed=22), tmp_path)
        second = tmp_path / "second"
        shutil.copytree(case.bundle_dir, second)
        with open(second / "messages.jsonl", "a", encoding="utf-8") as handle:
            handle.write(
                '{"id":"msg-9999","peer":"+353870000001","body":"late",'
                '"direction":"Incoming","delivered_at":"2016-05-14T12:00:00Z"}\n'
            )
        a = ingest_device_dump(case.bundle_dir)
        b = ingest_device_dump(second)
        diff = diff_acquisitions(a, b)
        assert diff.added == ("msg-9999",)
        assert diff.removed == () and diff.changed == ()

    def test_modified_timestamp_shows_as_changed(self, tmp_path):
        case = generate_case(SimParams(seed=23, n_apps=4), tmp_path)
        second = tmp_path / "second"
        shutil.copytree(case.bundle_dir, second)
        path = second / "installed_apps.jsonl"
        lines = path.read_text().splitlines()
        fields = json.loads(lines[0])
        fields["installed"] = "01/01/2016 01:01:01 AM"
        lines[0] = json.dumps(fields, separators=(",", ":"))
        path.write_text("\n".join(lines) + "\n")
        diff = diff_acquisitions(
            ingest_device_dump(case.bundle_dir), ingest_device_dump(second)
        )
        assert diff.changed == (json.loads(lines[0])["id"],)
        assert diff.added == () and diff.removed == ()

    def test_device_mismatch_requires_override(self, tmp_path):
        case_a = generate_case(SimParams(seed=24), tmp_path / "a")
        case_b = generate_case(SimParams(seed=25), tmp_path / "b")
        a = ingest_device_dump(case_a.bundle_dir)
        b = ingest_device_dump(case_b.bundle_dir)
        with pytest.raises(DeviceMismatch):
            diff_acquisitions(a, b)
        diff = diff_acquisitions(a, b, allow_device_mismatch=True)
        assert diff.identical_count >= 0

    def test_symmetry_up_to_swapping(self, tmp_path):
        case = generate_case(SimParams(seed=26), tmp_path)
        second = tmp_path / "second"
        shutil.copytree(case.bundle_dir, second)
        with open(second / "calls.jsonl", "a", encoding="utf-8") as handle:
            handle.write(
                '{"id":"call-9999","peer":"+353870000002","direction":"Outgoing",'
                '"at":"2016-05-14T13:00:00Z"}\n'
            )
        a = ingest_device_dump(case.bundle_dir)
        b = ingest_device_dump(second)
        ab = diff_acquisitions(a, b)
        ba = diff_acquisitions(b, a)
        assert ab.added == ba.removed
        assert ab.removed == ba.added
        assert ab.changed == ba.changed
        assert ab.identical_count == ba.identical_count
