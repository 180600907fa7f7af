"""Canonical XML for corpus documents.

One dialect serves every corpus artifact (segment metadata, subject and
sensor rosters, weather series, sig-sets).  Serialization is canonical so
that equal inputs yield byte-identical files: fixed element and attribute
order, shortest round-trip decimal formatting, UTF-8, LF line endings, and
two-space indentation.  parse(serialize(x)) followed by serialize is a
fixpoint.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from datetime import datetime

from .model import (
    AnnotationSet,
    EnvironmentRecord,
    FrameAnnotation,
    MediaSegment,
    PlatformGeometry,
    SensorRecord,
    SigSet,
    SigSetEntry,
    SubjectRecord,
    format_ts,
    parse_ts,
    truncate_to_minute,
)

__all__ = [
    "XmlParseError",
    "fmt_float",
    "parse_xml",
    "write_document",
    "segment_to_element",
    "element_to_segment",
    "annotations_to_element",
    "element_to_annotations",
    "subjects_to_element",
    "element_to_subjects",
    "sensors_to_element",
    "element_to_sensors",
    "weather_to_element",
    "element_to_weather",
    "write_sigset",
    "parse_sigset",
    "canonical_serialize",
]


class XmlParseError(ValueError):
    """Document is not well-formed XML (distinct from a schema violation)."""


def fmt_float(value: float) -> str:
    """Shortest decimal string that round-trips to the same double."""
    return repr(float(value))


def _fmt_bool(value: bool) -> str:
    return "true" if value else "false"


def _parse_bool(text: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_xml(data: bytes | str) -> ET.Element:
    try:
        if isinstance(data, bytes):
            return ET.fromstring(data)
        return ET.fromstring(data.encode("utf-8"))
    except ET.ParseError as exc:
        raise XmlParseError(str(exc)) from exc


# ---------------------------------------------------------------------------
# canonical writer
# ---------------------------------------------------------------------------

_ESCAPES_TEXT = (("&", "&amp;"), ("<", "&lt;"), (">", "&gt;"))
_ESCAPES_ATTR = _ESCAPES_TEXT + (('"', "&quot;"),)


def _escape(text: str, table) -> str:
    for raw, cooked in table:
        text = text.replace(raw, cooked)
    return text


def _write_element(elem: ET.Element, depth: int, out: list[str]) -> None:
    pad = "  " * depth
    attrs = "".join(
        f' {name}="{_escape(value, _ESCAPES_ATTR)}"' for name, value in elem.attrib.items()
    )
    children = list(elem)
    text = (elem.text or "").strip()
    if not children and not text:
        out.append(f"{pad}<{elem.tag}{attrs}/>\n")
    elif not children:
        out.append(f"{pad}<{elem.tag}{attrs}>{_escape(text, _ESCAPES_TEXT)}</{elem.tag}>\n")
    else:
        out.append(f"{pad}<{elem.tag}{attrs}>\n")
        for child in children:
            _write_element(child, depth + 1, out)
        out.append(f"{pad}</{elem.tag}>\n")


def write_document(root: ET.Element) -> bytes:
    lines = ['<?xml version="1.0" encoding="UTF-8"?>\n']
    _write_element(root, 0, lines)
    return "".join(lines).encode("utf-8")


# ---------------------------------------------------------------------------
# media segment documents
# ---------------------------------------------------------------------------


def _bbox_element(tag: str, bbox: tuple[float, float, float, float]) -> ET.Element:
    elem = ET.Element(tag)
    for name, value in zip(("x", "y", "w", "h"), bbox):
        elem.set(name, fmt_float(value))
    return elem


def _parse_bbox(elem: ET.Element) -> tuple[float, float, float, float]:
    return tuple(float(elem.get(name)) for name in ("x", "y", "w", "h"))  # type: ignore[return-value]


def _frame_to_element(frame: FrameAnnotation) -> ET.Element:
    elem = ET.Element("frame")
    elem.set("index", str(frame.frame_index))
    elem.set("source", frame.source)
    elem.set("identity-confirmed", _fmt_bool(frame.identity_confirmed))
    elem.set("occlusion", frame.occlusion)
    elem.append(_bbox_element("body-bbox", frame.body_bbox))
    elem.append(_bbox_element("head-bbox", frame.head_bbox))
    points = ET.SubElement(elem, "head-keypoints")
    for x, y, z in frame.head_keypoints_3d:
        point = ET.SubElement(points, "point")
        point.set("x", fmt_float(x))
        point.set("y", fmt_float(y))
        point.set("z", fmt_float(z))
    return elem


def _element_to_frame(elem: ET.Element) -> FrameAnnotation:
    keypoints = tuple(
        (float(p.get("x")), float(p.get("y")), float(p.get("z")))
        for p in elem.find("head-keypoints")
    )
    return FrameAnnotation(
        frame_index=int(elem.get("index")),
        body_bbox=_parse_bbox(elem.find("body-bbox")),
        head_bbox=_parse_bbox(elem.find("head-bbox")),
        head_keypoints_3d=keypoints,
        occlusion=elem.get("occlusion"),
        identity_confirmed=_parse_bool(elem.get("identity-confirmed")),
        source=elem.get("source"),
    )


def annotations_to_element(annotations: AnnotationSet) -> ET.Element:
    root = ET.Element("annotations")
    root.set("segment", annotations.segment_id)
    for frame in sorted(annotations.frames, key=lambda f: f.frame_index):
        root.append(_frame_to_element(frame))
    return root


def element_to_annotations(elem: ET.Element) -> AnnotationSet:
    frames = tuple(_element_to_frame(f) for f in elem.findall("frame"))
    return AnnotationSet(segment_id=elem.get("segment"), frames=frames)


def _environment_to_element(env: EnvironmentRecord) -> ET.Element:
    elem = ET.Element("environment")
    elem.set("sample-minute", format_ts(env.sample_minute))
    for name, value in (
        ("temperature-c", env.temperature_c),
        ("wind-chill-c", env.wind_chill_c),
        ("heat-index-c", env.heat_index_c),
        ("relative-humidity-pct", env.relative_humidity_pct),
        ("wind-speed-mps", env.wind_speed_mps),
        ("wind-direction-deg", env.wind_direction_deg),
        ("pressure-hpa", env.pressure_hpa),
        ("solar-loading-wpm2", env.solar_loading_wpm2),
        ("cn2", env.cn2),
    ):
        elem.set(name, fmt_float(value))
    return elem


def _element_to_environment(elem: ET.Element) -> EnvironmentRecord:
    return EnvironmentRecord(
        sample_minute=parse_ts(elem.get("sample-minute")),
        temperature_c=float(elem.get("temperature-c")),
        wind_chill_c=float(elem.get("wind-chill-c")),
        heat_index_c=float(elem.get("heat-index-c")),
        relative_humidity_pct=float(elem.get("relative-humidity-pct")),
        wind_speed_mps=float(elem.get("wind-speed-mps")),
        wind_direction_deg=float(elem.get("wind-direction-deg")),
        pressure_hpa=float(elem.get("pressure-hpa")),
        solar_loading_wpm2=float(elem.get("solar-loading-wpm2")),
        cn2=float(elem.get("cn2")),
    )


def segment_to_element(segment: MediaSegment) -> ET.Element:
    root = ET.Element("segment")
    root.set("id", segment.segment_id)
    ET.SubElement(root, "subject").set("ref", segment.subject_id)
    ET.SubElement(root, "activity").text = segment.activity
    ET.SubElement(root, "clothing-set").text = str(segment.clothing_set)
    ET.SubElement(root, "sensor").set("ref", segment.sensor_id)
    time_elem = ET.SubElement(root, "time")
    time_elem.set("start", format_ts(segment.start_ts))
    time_elem.set("end", format_ts(segment.end_ts))
    ET.SubElement(root, "payload").set("ref", segment.payload_ref)
    if segment.geometry is not None:
        geom = ET.SubElement(root, "geometry")
        geom.set("distance-m", fmt_float(segment.geometry.distance_m))
        geom.set("pitch-deg", fmt_float(segment.geometry.pitch_deg))
    if segment.environment is not None:
        root.append(_environment_to_element(segment.environment))
    root.append(annotations_to_element(segment.annotations))
    return root


def element_to_segment(root: ET.Element) -> MediaSegment:
    geometry = None
    geom_elem = root.find("geometry")
    if geom_elem is not None:
        geometry = PlatformGeometry(
            distance_m=float(geom_elem.get("distance-m")),
            pitch_deg=float(geom_elem.get("pitch-deg")),
        )
    env_elem = root.find("environment")
    time_elem = root.find("time")
    return MediaSegment(
        segment_id=root.get("id"),
        subject_id=root.find("subject").get("ref"),
        activity=root.find("activity").text,
        clothing_set=int(root.find("clothing-set").text),
        sensor_id=root.find("sensor").get("ref"),
        start_ts=parse_ts(time_elem.get("start")),
        end_ts=parse_ts(time_elem.get("end")),
        payload_ref=root.find("payload").get("ref"),
        annotations=element_to_annotations(root.find("annotations")),
        environment=None if env_elem is None else _element_to_environment(env_elem),
        geometry=geometry,
    )


def canonical_serialize(segment: MediaSegment) -> bytes:
    """Byte-identical output for equal segments; fixpoint under parse."""
    return write_document(segment_to_element(segment))


# ---------------------------------------------------------------------------
# rosters and series
# ---------------------------------------------------------------------------


def subjects_to_element(subjects: list[SubjectRecord]) -> ET.Element:
    root = ET.Element("subjects")
    for s in sorted(subjects, key=lambda s: s.subject_id):
        elem = ET.SubElement(root, "subject")
        elem.set("id", s.subject_id)
        elem.set("age-years", str(s.age_years))
        elem.set("gender", s.gender)
        elem.set("height-cm", str(s.height_cm))
        elem.set("split", s.split)
        elem.set("role", s.role)
    return root


def element_to_subjects(root: ET.Element) -> list[SubjectRecord]:
    return [
        SubjectRecord(
            subject_id=e.get("id"),
            age_years=int(e.get("age-years")),
            gender=e.get("gender"),
            height_cm=int(e.get("height-cm")),
            split=e.get("split"),
            role=e.get("role"),
        )
        for e in root.findall("subject")
    ]


def sensors_to_element(sensors: list[SensorRecord]) -> ET.Element:
    root = ET.Element("sensors")
    for s in sorted(sensors, key=lambda s: s.sensor_id):
        elem = ET.SubElement(root, "sensor")
        elem.set("id", s.sensor_id)
        elem.set("make", s.make)
        elem.set("model", s.model)
        elem.set("serial", s.serial)
        elem.set("resolution-w", str(s.resolution_px[0]))
        elem.set("resolution-h", str(s.resolution_px[1]))
        elem.set("focal-min-mm", fmt_float(s.focal_length_mm[0]))
        elem.set("focal-max-mm", fmt_float(s.focal_length_mm[1]))
        elem.set("focal-mm", fmt_float(s.focal_mm))
        elem.set("platform", s.platform)
        elem.set("setting", s.setting)
        elem.set("distance-m", fmt_float(s.distance_m))
        elem.set("pitch-deg", fmt_float(s.pitch_deg))
        elem.set("configuration", s.configuration)
    return root


def element_to_sensors(root: ET.Element) -> list[SensorRecord]:
    return [
        SensorRecord(
            sensor_id=e.get("id"),
            make=e.get("make"),
            model=e.get("model"),
            serial=e.get("serial"),
            resolution_px=(int(e.get("resolution-w")), int(e.get("resolution-h"))),
            focal_length_mm=(float(e.get("focal-min-mm")), float(e.get("focal-max-mm"))),
            focal_mm=float(e.get("focal-mm")),
            platform=e.get("platform"),
            setting=e.get("setting"),
            distance_m=float(e.get("distance-m")),
            pitch_deg=float(e.get("pitch-deg")),
            configuration=e.get("configuration"),
        )
        for e in root.findall("sensor")
    ]


def weather_to_element(series: list[EnvironmentRecord]) -> ET.Element:
    root = ET.Element("weather")
    for record in sorted(series, key=lambda r: r.sample_minute):
        if record.sample_minute != truncate_to_minute(record.sample_minute):
            raise ValueError("weather records must sit on minute boundaries")
        root.append(_environment_to_element(record))
    return root


def element_to_weather(root: ET.Element) -> list[EnvironmentRecord]:
    return [_element_to_environment(e) for e in root.findall("environment")]


# ---------------------------------------------------------------------------
# sig-sets
# ---------------------------------------------------------------------------


def write_sigset(sigset: SigSet) -> bytes:
    root = ET.Element("sigset")
    root.set("id", sigset.sigset_id)
    root.set("kind", sigset.kind)
    for entry in sigset.entries:
        elem = ET.SubElement(root, "entry")
        elem.set("id", entry.entry_id)
        if sigset.kind == "gallery":
            elem.set("subject", entry.subject_id)
        elem.set("modality-hint", entry.modality_hint)
        for ref in entry.media_refs:
            ET.SubElement(elem, "media").set("ref", ref)
    return write_document(root)


def parse_sigset(data: bytes | str) -> SigSet:
    """Parse a sig-set document; probe sig-sets must not name subjects."""
    root = parse_xml(data)
    if root.tag != "sigset":
        raise ValueError(f"expected <sigset> root, found <{root.tag}>")
    kind = root.get("kind")
    entries = []
    for elem in root.findall("entry"):
        subject = elem.get("subject")
        if kind == "probe" and subject is not None:
            raise ValueError(
                f"probe entry {elem.get('id')!r} carries a subject id (identity leak)"
            )
        entries.append(
            SigSetEntry(
                entry_id=elem.get("id"),
                media_refs=tuple(m.get("ref") for m in elem.findall("media")),
                subject_id=subject,
                modality_hint=elem.get("modality-hint", "all"),
            )
        )
    return SigSet(sigset_id=root.get("id"), kind=kind, entries=tuple(entries))
