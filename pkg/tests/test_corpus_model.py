"""Domain types, canonical XML serialization, schema validation, sig-sets."""

import xml.etree.ElementTree as ET
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_environment, make_frame, make_segment, ts
from mission_eval.model import SigSet, SigSetEntry
from mission_eval.schema import (
    SchemaViolationError,
    load_segment,
    schema_document,
    validate_metadata,
)
from mission_eval.xmlio import (
    XmlParseError,
    canonical_serialize,
    element_to_segment,
    parse_sigset,
    parse_xml,
    write_sigset,
)


class TestCanonicalSerialization:
    def test_serialize_twice_identical(self):
        segment = make_segment()
        assert canonical_serialize(segment) == canonical_serialize(segment)

    def test_parse_serialize_fixpoint(self):
        segment = make_segment()
        first = canonical_serialize(segment)
        reparsed = element_to_segment(parse_xml(first))
        assert canonical_serialize(reparsed) == first
        assert reparsed == segment

    def test_id_change_localized(self):
        base = make_segment(segment_id="seg--cam-a--aaaaaaaaaaaa")
        other = replace(base, segment_id="seg--cam-a--bbbbbbbbbbbb")
        a = canonical_serialize(base)
        b = canonical_serialize(other)
        diff = [
            (la, lb)
            for la, lb in zip(a.decode().splitlines(), b.decode().splitlines())
            if la != lb
        ]
        assert len(diff) == 1
        assert 'segment id="seg--cam-a--aaaaaaaaaaaa"' in diff[0][0]

    def test_geometry_round_trip(self):
        from mission_eval.model import PlatformGeometry

        segment = make_segment(geometry=PlatformGeometry(82.5, 24.0))
        reparsed = element_to_segment(parse_xml(canonical_serialize(segment)))
        assert reparsed.geometry == segment.geometry


class TestSchemaValidation:
    def test_complete_document_validates(self):
        report = validate_metadata(canonical_serialize(make_segment()))
        assert report.ok, report.violations

    def test_missing_wind_speed_named(self):
        doc = canonical_serialize(make_segment()).decode()
        root = ET.fromstring(doc)
        del root.find("environment").attrib["wind-speed-mps"]
        report = validate_metadata(ET.tostring(root))
        assert len(report.violations) == 1
        assert "wind-speed-mps" in report.violations[0].path
        assert report.violations[0].kind == "missing"

    def test_negative_head_bbox_width_is_range_violation(self):
        frame = make_frame()
        bad = replace(frame, head_bbox=(480.0, 110.0, -3.0, 30.0))
        segment = make_segment(frames=(bad,))
        report = validate_metadata(canonical_serialize(segment))
        assert any(v.kind == "range" and "head-bbox" in v.path for v in report.violations)

    def test_malformed_xml_distinct_from_schema_violation(self):
        with pytest.raises(XmlParseError):
            validate_metadata(b"<segment><unclosed>")

    @pytest.mark.parametrize("value", ["nan", "inf", "1e999", "-1e999", "abc", ""])
    def test_adversarial_numeric_strings(self, value):
        root = ET.fromstring(canonical_serialize(make_segment()).decode())
        root.find("environment").set("temperature-c", value)
        report = validate_metadata(ET.tostring(root))
        assert not report.ok
        assert all(v.kind in ("type", "range") for v in report.violations)

    def test_environment_minute_must_match_start(self):
        segment = make_segment(start="2025-06-02T13:03:45Z",
                               environment=make_environment("2025-06-02T13:04:00Z"))
        report = validate_metadata(canonical_serialize(segment))
        assert any("sample-minute" in v.path for v in report.violations)

    def test_end_before_start_rejected(self):
        root = ET.fromstring(canonical_serialize(make_segment()).decode())
        root.find("time").set("end", root.find("time").get("start"))
        report = validate_metadata(ET.tostring(root))
        assert any(v.path == "segment/time" and v.kind == "range"
                   for v in report.violations)

    def test_bbox_resolution_check_with_sensor_context(self):
        from mission_eval.model import SensorRecord

        sensor = SensorRecord(
            sensor_id="cam-a", make="m", model="m", serial="s",
            resolution_px=(640, 480), focal_length_mm=(4.0, 12.0), focal_mm=8.0,
            platform="ground", setting="field", distance_m=5.0, pitch_deg=0.0,
            configuration="wholebody-configured")
        report = validate_metadata(canonical_serialize(make_segment()),
                                   sensors={"cam-a": sensor})
        assert any("exceeds sensor resolution" in v.message for v in report.violations)

    def test_head_outside_padded_body_rejected(self):
        bad = replace(make_frame(), head_bbox=(10.0, 10.0, 24.0, 30.0))
        report = validate_metadata(canonical_serialize(make_segment(frames=(bad,))))
        assert any("padded body" in v.message for v in report.violations)

    def test_duplicate_frame_index_rejected(self):
        segment = make_segment(frames=(make_frame(0), make_frame(0)))
        report = validate_metadata(canonical_serialize(segment))
        assert any(v.kind == "structure" and "duplicate" in v.message
                   for v in report.violations)

    def test_load_segment_rejects_violations(self):
        root = ET.fromstring(canonical_serialize(make_segment()).decode())
        del root.find("environment").attrib["cn2"]
        with pytest.raises(SchemaViolationError):
            load_segment(ET.tostring(root))

    def test_schema_document_mentions_every_environment_field(self):
        doc = schema_document()
        for name in ("temperature-c", "wind-speed-mps", "cn2", "sample-minute"):
            assert name in doc

    @given(st.integers(0, 400),
           st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=0x2FF),
                   max_size=12))
    @settings(max_examples=60, deadline=None)
    def test_validation_total_under_attribute_mutation(self, position, junk):
        # validation must yield a violation list, never crash, for any
        # attribute value substitution on a well-formed document
        root = ET.fromstring(canonical_serialize(make_segment()).decode())
        nodes = list(root.iter())
        node = nodes[position % len(nodes)]
        if node.attrib:
            key = sorted(node.attrib)[position % len(node.attrib)]
            node.set(key, junk)
        validate_metadata(ET.tostring(root))


class TestSigSets:
    def _gallery(self):
        return SigSet(
            sigset_id="gal", kind="gallery",
            entries=tuple(
                SigSetEntry(entry_id=f"g--sub-{i:04d}", media_refs=(f"seg-{i}a", f"seg-{i}b"),
                            subject_id=f"sub-{i:04d}")
                for i in range(1, 4)
            ),
        )

    def test_gallery_round_trip(self):
        sigset = self._gallery()
        parsed = parse_sigset(write_sigset(sigset))
        assert parsed.kind == "gallery"
        assert len(parsed.entries) == 3
        assert parsed == sigset

    def test_probe_round_trip_structural_equality(self):
        sigset = SigSet(
            sigset_id="probes", kind="probe",
            entries=(SigSetEntry(entry_id="p--seg-1", media_refs=("seg-1",)),
                     SigSetEntry(entry_id="p--seg-2", media_refs=("seg-2",))),
        )
        assert parse_sigset(write_sigset(sigset)) == sigset

    def test_probe_with_subject_rejected(self):
        doc = (b'<?xml version="1.0" encoding="UTF-8"?>\n'
               b'<sigset id="p" kind="probe">\n'
               b'  <entry id="p--1" subject="sub-0001" modality-hint="all">\n'
               b'    <media ref="seg-1"/>\n'
               b'  </entry>\n'
               b'</sigset>\n')
        with pytest.raises(ValueError, match="identity leak"):
            parse_sigset(doc)

    def test_gallery_entry_without_subject_rejected(self):
        with pytest.raises(ValueError, match="lacks subject_id"):
            SigSet(sigset_id="g", kind="gallery",
                   entries=(SigSetEntry(entry_id="e", media_refs=("m",)),))

    def test_gallery_entry_without_media_rejected(self):
        with pytest.raises(ValueError, match="no media"):
            SigSet(sigset_id="g", kind="gallery",
                   entries=(SigSetEntry(entry_id="e", media_refs=(), subject_id="s"),))

    def test_probe_entry_requires_exactly_one_media(self):
        with pytest.raises(ValueError, match="exactly one"):
            SigSet(sigset_id="p", kind="probe",
                   entries=(SigSetEntry(entry_id="e", media_refs=("a", "b")),))

    def test_duplicate_entry_ids_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            SigSet(sigset_id="p", kind="probe",
                   entries=(SigSetEntry(entry_id="e", media_refs=("a",)),
                            SigSetEntry(entry_id="e", media_refs=("b",))))
