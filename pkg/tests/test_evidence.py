from __future__ import annotations

import hashlib
import shutil
import subprocess

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synctrail.errors import ImpossibleDate, UnparseableTimestamp
from synctrail.evidence import (
    ArtifactCategory,
    Digest256,
    EvidenceRecord,
    Locale,
    Source,
    UtcTimestamp,
    canonical_encode,
    epoch_to_iso,
    normalize_timestamp,
    record_digest,
)

from _oracles import civil_to_epoch, reference_encode

SHA256_EMPTY = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"

# Text safe for evidence fields: no reserved separators.
clean_text = st.text(
    alphabet=st.characters(blacklist_characters="\x1f\x1e", blacklist_categories=("Cs",)),
    min_size=1,
    max_size=20,
)
attribute_maps = st.dictionaries(clean_text, clean_text, max_size=5)


def make_record(record_id="r1", category=ArtifactCategory.MESSAGE, timestamp=None,
                attributes=None, source=Source.DEVICE) -> EvidenceRecord:
    return EvidenceRecord(
        record_id=record_id,
        category=category,
        timestamp=timestamp,
        attributes=attributes if attributes is not None else {},
        source=source,
    )


class TestNormalizeTimestamp:
    def test_figure_day_first_sheets(self):
        ts = normalize_timestamp("16/12/2015 11:58:23 PM", Locale.DAY_FIRST, 0)
        assert ts.to_iso() == "2015-12-16T23:58:23Z"
        assert ts.seconds_since_epoch == civil_to_epoch(2015, 12, 16, 23, 58, 23)
        assert ts.original_text == "16/12/2015 11:58:23 PM"

    def test_epoch_identity(self):
        ts = normalize_timestamp("1970-01-01T00:00:00Z", Locale.DAY_FIRST, 0)
        assert ts.seconds_since_epoch == 0

    def test_figure_day_first_instagram(self):
        ts = normalize_timestamp("06/04/2016 02:33:53 PM", Locale.DAY_FIRST, 0)
        assert ts.to_iso() == "2016-04-06T14:33:53Z"
        assert ts.seconds_since_epoch == civil_to_epoch(2016, 4, 6, 14, 33, 53)

    def test_month_first_flips_fields(self):
        ts = normalize_timestamp("06/04/2016 02:33:53 PM", Locale.MONTH_FIRST, 0)
        assert ts.to_iso() == "2016-06-04T14:33:53Z"

    def test_day_16_impossible_month_first(self):
        with pytest.raises(ImpossibleDate):
            normalize_timestamp("16/12/2015 11:58:23 PM", Locale.MONTH_FIRST, 0)

    def test_iso_ignores_locale(self):
        a = normalize_timestamp("2016-04-06T14:33:53Z", Locale.DAY_FIRST, 0)
        b = normalize_timestamp("2016-04-06T14:33:53Z", Locale.MONTH_FIRST, 0)
        assert a.seconds_since_epoch == b.seconds_since_epoch

    def test_iso_with_offset(self):
        ts = normalize_timestamp("2016-04-06T15:33:53+01:00", Locale.DAY_FIRST, 0)
        assert ts.to_iso() == "2016-04-06T14:33:53Z"

    def test_legacy_applies_zone_offset(self):
        utc = normalize_timestamp("06/04/2016 02:33:53 PM", Locale.DAY_FIRST, 0)
        shifted = normalize_timestamp("06/04/2016 02:33:53 PM", Locale.DAY_FIRST, 60)
        assert shifted.seconds_since_epoch == utc.seconds_since_epoch - 3600

    def test_noon_and_midnight(self):
        noon = normalize_timestamp("01/01/2016 12:00:00 PM", Locale.DAY_FIRST, 0)
        midnight = normalize_timestamp("01/01/2016 12:00:00 AM", Locale.DAY_FIRST, 0)
        assert noon.to_iso() == "2016-01-01T12:00:00Z"
        assert midnight.to_iso() == "2016-01-01T00:00:00Z"

    @pytest.mark.parametrize(
        "raw",
        [
            "29/02/2015 01:00:00 AM",  # not a leap year
            "31/04/2016 01:00:00 AM",
            "00/05/2016 01:00:00 AM",
            "01/13/2016 01:00:00 AM",  # month 13 under day-first
            "01/01/1969 01:00:00 AM",
            "2101-01-01T00:00:00Z",
            "01/01/2016 00:15:00 AM",  # hour 0 on a 12-hour clock
        ],
    )
    def test_impossible_dates(self, raw):
        with pytest.raises(ImpossibleDate):
            normalize_timestamp(raw, Locale.DAY_FIRST, 0)

    @pytest.mark.parametrize("raw", ["", "yesterday", "2016-04-06 14:33:53", "06-04-2016 02:33:53 PM"])
    def test_unparseable(self, raw):
        with pytest.raises(UnparseableTimestamp):
            normalize_timestamp(raw, Locale.DAY_FIRST, 0)

    @given(st.integers(min_value=0, max_value=4133980799))
    def test_iso_round_trip(self, epoch):
        rendered = epoch_to_iso(epoch)
        assert normalize_timestamp(rendered, Locale.DAY_FIRST, 0).seconds_since_epoch == epoch

    @given(
        st.integers(min_value=0, max_value=4133980799),
        st.sampled_from([Locale.DAY_FIRST, Locale.MONTH_FIRST]),
    )
    def test_iso_rendering_matches_civil_oracle(self, epoch, locale):
        ts = normalize_timestamp(epoch_to_iso(epoch), locale, 0)
        iso = ts.to_iso()
        parts = [int(x) for x in (iso[0:4], iso[5:7], iso[8:10], iso[11:13], iso[14:16], iso[17:19])]
        assert civil_to_epoch(*parts) == epoch


class TestCanonicalEncode:
    def test_attribute_order_independent(self):
        a = make_record(attributes={"k1": "v1", "k2": "v2"})
        b = make_record(attributes={"k2": "v2", "k1": "v1"})
        assert canonical_encode(a) == canonical_encode(b)

    def test_empty_attributes_is_header_plus_terminator(self):
        record = make_record(record_id="x", category=ArtifactCategory.SIM_CARD)
        assert canonical_encode(record) == b"x\x1fSimCard\x1f\x1fDevice\x1e"

    def test_matches_reference_encoder_on_fixture(self):
        ts = normalize_timestamp("16/12/2015 11:58:23 PM", Locale.DAY_FIRST, 0)
        record = make_record(
            record_id="app-0002",
            category=ArtifactCategory.INSTALLED_APP,
            timestamp=ts,
            attributes={"name": "Sheets", "status": "All", "_line": "2"},
        )
        assert canonical_encode(record) == reference_encode(record)

    @given(record_id=clean_text, attributes=attribute_maps)
    def test_matches_reference_encoder(self, record_id, attributes):
        record = make_record(record_id=record_id, attributes=attributes)
        assert canonical_encode(record) == reference_encode(record)

    @given(
        id_a=clean_text,
        id_b=clean_text,
        attrs_a=attribute_maps,
        attrs_b=attribute_maps,
        cat_a=st.sampled_from(ArtifactCategory),
        cat_b=st.sampled_from(ArtifactCategory),
    )
    @settings(max_examples=200)
    def test_injective_over_distinct_records(self, id_a, id_b, attrs_a, attrs_b, cat_a, cat_b):
        a = make_record(record_id=id_a, category=cat_a, attributes=attrs_a)
        b = make_record(record_id=id_b, category=cat_b, attributes=attrs_b)
        if (id_a, cat_a, attrs_a) != (id_b, cat_b, attrs_b):
            assert canonical_encode(a) != canonical_encode(b)
        else:
            assert canonical_encode(a) == canonical_encode(b)

    def test_separator_bytes_rejected(self):
        with pytest.raises(ValueError):
            make_record(attributes={"k": "bad\x1fvalue"})
        with pytest.raises(ValueError):
            make_record(record_id="bad\x1eid")


class TestRecordDigest:
    def test_sha256_empty_input_constant(self):
        assert hashlib.sha256(b"").hexdigest() == SHA256_EMPTY

    def test_deterministic(self):
        a = make_record(attributes={"k": "v"})
        b = make_record(attributes={"k": "v"})
        assert record_digest(a) == record_digest(b) == a.digest

    def test_digest_set_at_construction(self):
        record = make_record(attributes={"k": "v"})
        assert record.digest == record_digest(record)
        assert len(record.digest.hex()) == 64
        assert record.digest.hex() == record.digest.hex().lower()

    def test_against_external_sha256_tool(self, tmp_path):
        tool = shutil.which("sha256sum")
        assert tool, "coreutils sha256sum expected on the test host"
        record = make_record(
            record_id="app-0005",
            category=ArtifactCategory.INSTALLED_APP,
            timestamp=normalize_timestamp("06/04/2016 02:33:53 PM", Locale.DAY_FIRST, 0),
            attributes={"name": "Instagram", "status": "All"},
        )
        blob = tmp_path / "record.bin"
        blob.write_bytes(canonical_encode(record))
        out = subprocess.run([tool, str(blob)], capture_output=True, text=True, check=True)
        assert out.stdout.split()[0] == record.digest.hex()

    @given(attributes=st.dictionaries(clean_text, clean_text, min_size=1, max_size=4), data=st.data())
    def test_avalanche_on_single_byte_flip(self, attributes, data):
        record = make_record(attributes=attributes)
        key = data.draw(st.sampled_from(sorted(attributes)))
        value = attributes[key]
        pos = data.draw(st.integers(min_value=0, max_value=len(value) - 1))
        replacement = "x" if value[pos] != "x" else "y"
        mutated = dict(attributes)
        mutated[key] = value[:pos] + replacement + value[pos + 1 :]
        assert record_digest(make_record(attributes=mutated)) != record.digest


class TestDigest256:
    def test_fixed_length(self):
        with pytest.raises(ValueError):
            Digest256(b"\x00" * 31)

    def test_hex_round_trip(self):
        digest = Digest256(bytes(range(32)))
        assert Digest256.from_hex(digest.hex()) == digest


class TestUtcTimestamp:
    def test_range_enforced(self):
        with pytest.raises(ImpossibleDate):
            UtcTimestamp(-1, "before epoch")
        with pytest.raises(ImpossibleDate):
            UtcTimestamp(4133980799 + 1, "after 2100")

    def test_original_text_required(self):
        with pytest.raises(ValueError):
            UtcTimestamp(0, "")
