"""Rule-table schema validation for per-segment metadata documents.

The schema is an internal table (field, type, range, required) rather than an
external schema-language file, which keeps validation portable and total:
every document either validates or yields a finite violation list.  Malformed
XML raises XmlParseError before validation and is a distinct failure class.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .model import ACTIVITIES, OCCLUSIONS, MediaSegment, SensorRecord, parse_ts, truncate_to_minute
from .xmlio import element_to_segment, parse_xml

__all__ = [
    "Violation",
    "ValidationReport",
    "SchemaViolationError",
    "validate_metadata",
    "load_segment",
    "schema_document",
    "ENVIRONMENT_FIELDS",
    "HEAD_IN_BODY_PAD",
]

# head-bbox must sit inside the body-bbox padded by this fraction of its size
HEAD_IN_BODY_PAD = 0.15

# attribute name -> (lower bound, upper bound) on <environment>
ENVIRONMENT_FIELDS: dict[str, tuple[float, float]] = {
    "temperature-c": (-90.0, 60.0),
    "wind-chill-c": (-110.0, 60.0),
    "heat-index-c": (-90.0, 90.0),
    "relative-humidity-pct": (0.0, 100.0),
    "wind-speed-mps": (0.0, 120.0),
    "wind-direction-deg": (0.0, 360.0),
    "pressure-hpa": (800.0, 1100.0),
    "solar-loading-wpm2": (0.0, 1500.0),
    "cn2": (0.0, 1e-10),
}

_ENUMS = {
    "activity": ACTIVITIES,
    "occlusion": OCCLUSIONS,
    "source": ("auto", "manual"),
    "clothing-set": ("1", "2"),
}


@dataclass(frozen=True)
class Violation:
    path: str
    kind: str       # missing | type | range | structure
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.kind}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, path: str, kind: str, message: str) -> None:
        self.violations.append(Violation(path, kind, message))


class SchemaViolationError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        lines = "; ".join(str(v) for v in report.violations[:5])
        super().__init__(f"{len(report.violations)} schema violation(s): {lines}")


def _get_float(
    elem: ET.Element, attr: str, path: str, report: ValidationReport,
    lo: float = -math.inf, hi: float = math.inf,
) -> float | None:
    raw = elem.get(attr)
    if raw is None:
        report.add(f"{path}@{attr}", "missing", "required field absent")
        return None
    try:
        value = float(raw)
    except ValueError:
        report.add(f"{path}@{attr}", "type", f"not a number: {raw!r}")
        return None
    if not math.isfinite(value):
        report.add(f"{path}@{attr}", "range", f"not finite: {raw!r}")
        return None
    if not lo <= value <= hi:
        report.add(f"{path}@{attr}", "range", f"{value!r} outside [{lo}, {hi}]")
        return None
    return value


def _get_ts(elem: ET.Element, attr: str, path: str, report: ValidationReport):
    raw = elem.get(attr)
    if raw is None:
        report.add(f"{path}@{attr}", "missing", "required field absent")
        return None
    try:
        return parse_ts(raw)
    except ValueError:
        report.add(f"{path}@{attr}", "type", f"not a UTC second-precision timestamp: {raw!r}")
        return None


def _require(root: ET.Element, tag: str, report: ValidationReport) -> ET.Element | None:
    elem = root.find(tag)
    if elem is None:
        report.add(f"segment/{tag}", "missing", "required element absent")
    return elem


def _check_bbox(
    frame: ET.Element, tag: str, path: str, report: ValidationReport,
    resolution: tuple[int, int] | None,
) -> tuple[float, float, float, float] | None:
    elem = frame.find(tag)
    if elem is None:
        report.add(f"{path}/{tag}", "missing", "required element absent")
        return None
    values = []
    for attr in ("x", "y", "w", "h"):
        lo = 0.0 if attr in ("x", "y") else 1e-9
        value = _get_float(elem, attr, f"{path}/{tag}", report, lo=lo)
        if value is None:
            return None
        values.append(value)
    x, y, w, h = values
    if resolution is not None:
        rw, rh = resolution
        if x + w > rw + 1e-6 or y + h > rh + 1e-6:
            report.add(f"{path}/{tag}", "range", f"bbox exceeds sensor resolution {rw}x{rh}")
    return (x, y, w, h)


def validate_metadata(
    doc: bytes | str | ET.Element,
    sensors: dict[str, SensorRecord] | None = None,
) -> ValidationReport:
    """Validate one per-segment metadata document against the rule table.

    Returns a report listing zero or more violations; never raises on
    adversarial content once the XML itself is well-formed.  Passing the
    sensor roster enables the cross-document bbox-within-resolution check.
    """
    root = doc if isinstance(doc, ET.Element) else parse_xml(doc)
    report = ValidationReport()

    if root.tag != "segment":
        report.add("/", "structure", f"expected <segment> root, found <{root.tag}>")
        return report
    if not root.get("id"):
        report.add("segment@id", "missing", "required field absent")

    subject = _require(root, "subject", report)
    if subject is not None and not subject.get("ref"):
        report.add("segment/subject@ref", "missing", "required field absent")

    activity = _require(root, "activity", report)
    if activity is not None and (activity.text or "") not in _ENUMS["activity"]:
        report.add("segment/activity", "range", f"unknown activity {activity.text!r}")

    clothing = _require(root, "clothing-set", report)
    if clothing is not None and (clothing.text or "") not in _ENUMS["clothing-set"]:
        report.add("segment/clothing-set", "range", f"must be 1 or 2, got {clothing.text!r}")

    sensor_elem = _require(root, "sensor", report)
    resolution = None
    if sensor_elem is not None:
        ref = sensor_elem.get("ref")
        if not ref:
            report.add("segment/sensor@ref", "missing", "required field absent")
        elif sensors is not None:
            if ref not in sensors:
                report.add("segment/sensor@ref", "range", f"unknown sensor {ref!r}")
            else:
                resolution = sensors[ref].resolution_px

    start = end = None
    time_elem = _require(root, "time", report)
    if time_elem is not None:
        start = _get_ts(time_elem, "start", "segment/time", report)
        end = _get_ts(time_elem, "end", "segment/time", report)
        if start is not None and end is not None and end <= start:
            report.add("segment/time", "range", "end must follow start")

    payload = _require(root, "payload", report)
    if payload is not None and not payload.get("ref"):
        report.add("segment/payload@ref", "missing", "required field absent")

    geom = root.find("geometry")
    if geom is not None:
        _get_float(geom, "distance-m", "segment/geometry", report, lo=1e-9)
        _get_float(geom, "pitch-deg", "segment/geometry", report, lo=-90.0, hi=90.0)

    env = _require(root, "environment", report)
    if env is not None:
        for name, (lo, hi) in ENVIRONMENT_FIELDS.items():
            _get_float(env, name, "segment/environment", report, lo=lo, hi=hi)
        minute = _get_ts(env, "sample-minute", "segment/environment", report)
        if minute is not None:
            if minute != truncate_to_minute(minute):
                report.add(
                    "segment/environment@sample-minute", "range",
                    "must be truncated to the minute",
                )
            elif start is not None and minute != truncate_to_minute(start):
                report.add(
                    "segment/environment@sample-minute", "range",
                    "must equal segment start truncated to the minute",
                )

    annotations = _require(root, "annotations", report)
    if annotations is not None:
        seen: set[int] = set()
        for i, frame in enumerate(annotations.findall("frame")):
            path = f"segment/annotations/frame[{i}]"
            raw_index = frame.get("index")
            if raw_index is None:
                report.add(f"{path}@index", "missing", "required field absent")
            else:
                try:
                    index = int(raw_index)
                except ValueError:
                    report.add(f"{path}@index", "type", f"not an integer: {raw_index!r}")
                else:
                    if index < 0:
                        report.add(f"{path}@index", "range", "negative frame index")
                    elif index in seen:
                        report.add(f"{path}@index", "structure", f"duplicate frame index {index}")
                    seen.add(index)

            if frame.get("occlusion") not in _ENUMS["occlusion"]:
                report.add(f"{path}@occlusion", "range", f"unknown flag {frame.get('occlusion')!r}")
            if frame.get("source") not in _ENUMS["source"]:
                report.add(f"{path}@source", "range", f"unknown source {frame.get('source')!r}")
            if frame.get("identity-confirmed") not in ("true", "false"):
                report.add(f"{path}@identity-confirmed", "type", "must be true or false")

            body = _check_bbox(frame, "body-bbox", path, report, resolution)
            head = _check_bbox(frame, "head-bbox", path, report, resolution)
            if body is not None and head is not None:
                bx, by, bw, bh = body
                hx, hy, hw, hh = head
                pad_x, pad_y = HEAD_IN_BODY_PAD * bw, HEAD_IN_BODY_PAD * bh
                if (
                    hx < bx - pad_x - 1e-6
                    or hy < by - pad_y - 1e-6
                    or hx + hw > bx + bw + pad_x + 1e-6
                    or hy + hh > by + bh + pad_y + 1e-6
                ):
                    report.add(f"{path}/head-bbox", "range", "head bbox outside padded body bbox")

            points = frame.find("head-keypoints")
            if points is None:
                report.add(f"{path}/head-keypoints", "missing", "required element absent")
            else:
                pts = points.findall("point")
                if len(pts) < 3:
                    report.add(f"{path}/head-keypoints", "structure", "need at least 3 points")
                for j, point in enumerate(pts):
                    for attr in ("x", "y", "z"):
                        _get_float(point, attr, f"{path}/head-keypoints/point[{j}]", report)

    return report


def load_segment(
    data: bytes | str,
    sensors: dict[str, SensorRecord] | None = None,
) -> MediaSegment:
    """Parse and validate; rejects documents with any violation."""
    root = parse_xml(data)
    report = validate_metadata(root, sensors=sensors)
    if not report.ok:
        raise SchemaViolationError(report)
    return element_to_segment(root)


def schema_document() -> str:
    """Human-readable rendering of the metadata schema rule table."""
    lines = [
        "Per-segment metadata document schema (<segment id=...>)",
        "=" * 58,
        "",
        "Required elements:",
        "  subject@ref          opaque subject id",
        "  activity             one of: " + ", ".join(ACTIVITIES),
        "  clothing-set         1 or 2",
        "  sensor@ref           sensor roster id",
        "  time@start, @end     UTC ISO-8601 seconds; end > start",
        "  payload@ref          path to the segment payload",
        "  environment          weather/atmosphere sample (see below)",
        "  annotations          per-frame records (see below)",
        "",
        "Optional elements:",
        "  geometry@distance-m (> 0), @pitch-deg [-90, 90]",
        "      per-segment platform telemetry; overrides the sensor roster",
        "",
        "environment attributes (all required, finite):",
    ]
    for name, (lo, hi) in ENVIRONMENT_FIELDS.items():
        lines.append(f"  {name:24s} [{lo!r}, {hi!r}]")
    lines += [
        "  sample-minute           UTC timestamp truncated to the minute,",
        "                          equal to segment start truncated likewise",
        "",
        "annotations/frame attributes:",
        "  index                   integer >= 0, unique within the document",
        "  source                  auto | manual",
        "  identity-confirmed      true | false",
        "  occlusion               " + " | ".join(OCCLUSIONS),
        "",
        "annotations/frame children:",
        "  body-bbox, head-bbox    x,y >= 0; w,h > 0; inside sensor resolution",
        f"                          head-bbox within body-bbox padded by {HEAD_IN_BODY_PAD:.0%}",
        "  head-keypoints/point    >= 3 finite 3D points (canonical head frame",
        "                          correspondences rotated by the head pose)",
        "",
        "A document is loadable only with zero violations.",
    ]
    return "\n".join(lines) + "\n"
