"""End-to-end pipeline stages over a corpus directory.

Each stage persists everything the next one needs, so any stage can be
re-run in isolation:

    generate  -> raw collection event (rosters, log, recordings, payloads,
                 auto/manual annotations, weather)
    curate    -> validated per-segment metadata XML beside each payload,
                 train/test split, quarantine index
    partition -> gallery/probe sig-sets, per-cell sig-sets, truth, manifest
    evaluate  -> score matrix CSV + search results via a negotiated HS
    report    -> per-mission report bundle (CSV, XML, SVG)
"""

from __future__ import annotations

import hashlib
import logging
import shutil
import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .curation import (
    attach_environment,
    element_to_activity_log,
    element_to_recordings,
    is_quarantined,
    merge_annotations,
    segment_by_timestamps,
    split_report_document,
    split_report_table,
    split_train_test,
)
from .harness import (
    ConstraintProfile,
    InProcessSession,
    ScoreMatrix,
    default_profile,
    enroll,
    negotiate,
    open_wire_session,
    probe_ingest,
    profile_from_bytes,
    search,
    verify,
)
from .model import (
    AnnotationSet,
    MediaSegment,
    PlatformGeometry,
    SensorRecord,
    SigSet,
    SigSetEntry,
    SubjectRecord,
)
from .partition import (
    Mission,
    PartitionConfig,
    PartitionResult,
    ProbeCandidate,
    Restriction,
    Treatment,
    build_partition,
    classify_probe,
    partition_manifest_to_bytes,
    partition_truth_from_bytes,
    partition_truth_to_bytes,
)
from .reference_hs import MODES, ReferenceHs
from .report import ReportBundle, mission_report
from .schema import SchemaViolationError, load_segment, validate_metadata
from .synthgen import Corpus, GeneratorConfig, generate_event, write_corpus
from .xmlio import (
    element_to_annotations,
    element_to_sensors,
    element_to_subjects,
    element_to_weather,
    fmt_float,
    parse_sigset,
    parse_xml,
    segment_to_element,
    subjects_to_element,
    write_document,
    write_sigset,
)

log = logging.getLogger(__name__)

__all__ = [
    "StageError",
    "CuratedCorpus",
    "stage_generate",
    "stage_curate",
    "stage_partition",
    "stage_evaluate",
    "stage_report",
    "run_evaluation",
    "write_run_manifest",
    "load_curated",
    "load_partition",
]


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


# ---------------------------------------------------------------------------
# run manifests
# ---------------------------------------------------------------------------


def write_run_manifest(out_dir: Path, command: str, seed: int,
                       config_material: bytes, paths: dict[str, str]) -> None:
    """Per-command provenance record; the hash is a pure function of the
    configuration material, never of wall-clock time."""
    root = ET.Element("run-manifest")
    root.set("command", command)
    root.set("tool-version", __version__)
    root.set("seed", str(seed))
    root.set("config-hash", hashlib.sha256(config_material).hexdigest())
    root.set("completed-utc",
             datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"))
    for name in sorted(paths):
        elem = ET.SubElement(root, "path")
        elem.set("name", name)
        elem.set("value", paths[name])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"run_manifest_{command}.xml").write_bytes(write_document(root))


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def stage_generate(config: GeneratorConfig, corpus_dir: str | Path) -> Corpus:
    corpus_dir = Path(corpus_dir)
    corpus = generate_event(config)
    write_corpus(corpus, corpus_dir)
    from .synthgen import generator_config_to_element

    write_run_manifest(corpus_dir, "generate", config.seed,
                       write_document(generator_config_to_element(config)),
                       {"corpus": str(corpus_dir)})
    return corpus


# ---------------------------------------------------------------------------
# curate
# ---------------------------------------------------------------------------


@dataclass
class CuratedCorpus:
    subjects: list[SubjectRecord]
    sensors: dict[str, SensorRecord]
    segments: dict[str, MediaSegment]       # merged annotations, environment attached
    quarantined: frozenset[str]

    def subject(self, subject_id: str) -> SubjectRecord:
        for s in self.subjects:
            if s.subject_id == subject_id:
                return s
        raise KeyError(subject_id)


def _read_annotations_dir(path: Path) -> dict[str, "object"]:
    out = {}
    if path.is_dir():
        for file in sorted(path.glob("*.xml")):
            annotations = element_to_annotations(parse_xml(file.read_bytes()))
            out[annotations.segment_id] = annotations
    return out


def stage_curate(
    corpus_dir: str | Path,
    test_fraction: float = 0.5,
    tolerance: float = 0.05,
    seed: int = 0,
) -> CuratedCorpus:
    """Steps: cut recordings, attach weather, merge annotations, quarantine,
    split train/test, validate and write per-segment metadata documents."""
    corpus_dir = Path(corpus_dir)
    subjects = element_to_subjects(parse_xml((corpus_dir / "subjects.xml").read_bytes()))
    sensors = {s.sensor_id: s
               for s in element_to_sensors(parse_xml((corpus_dir / "sensors.xml").read_bytes()))}
    activity_log = element_to_activity_log(
        parse_xml((corpus_dir / "activity_log.xml").read_bytes()))
    recordings = element_to_recordings(
        parse_xml((corpus_dir / "recordings.xml").read_bytes()))
    weather = element_to_weather(parse_xml((corpus_dir / "weather.xml").read_bytes()))
    by_minute = {w.sample_minute: w for w in weather}
    autos = _read_annotations_dir(corpus_dir / "annotations" / "auto")
    manuals = _read_annotations_dir(corpus_dir / "annotations" / "manual")

    segments: dict[str, MediaSegment] = {}
    quarantined: set[str] = set()
    geometry_overrides = _read_geometry_overrides(corpus_dir)
    for recording in recordings:
        for segment in segment_by_timestamps(recording, activity_log):
            segment = attach_environment(segment, by_minute)
            auto = autos.get(segment.segment_id, AnnotationSet(segment.segment_id))
            manual = manuals.get(segment.segment_id, AnnotationSet(segment.segment_id))
            merged = merge_annotations(auto, manual)
            segment = segment.with_annotations(merged)
            override = geometry_overrides.get(segment.segment_id)
            if override is not None:
                segment = replace(segment, geometry=override)
            if is_quarantined(merged):
                quarantined.add(segment.segment_id)
            segments[segment.segment_id] = segment

    # split over probe subjects; distractors are test-side by construction
    probe_subjects = [s for s in subjects if s.role == "probe-subject"]
    report = split_train_test(probe_subjects, test_fraction, tolerance, seed)
    updated_subjects = []
    for subject in subjects:
        if subject.role == "distractor":
            updated_subjects.append(
                SubjectRecord(subject.subject_id, subject.age_years, subject.gender,
                              subject.height_cm, "test", subject.role))
        else:
            updated_subjects.append(
                SubjectRecord(subject.subject_id, subject.age_years, subject.gender,
                              subject.height_cm, report.assignment[subject.subject_id],
                              subject.role))

    # validate and persist one metadata document per segment, beside its payload
    for segment_id in sorted(segments):
        doc = write_document(segment_to_element(segments[segment_id]))
        violations = validate_metadata(doc, sensors=sensors)
        if not violations.ok:
            raise StageError("curate", f"segment {segment_id} failed schema validation: "
                                       f"{violations.violations[0]}")
        (corpus_dir / "segments" / f"{segment_id}.xml").write_bytes(doc)

    (corpus_dir / "subjects.xml").write_bytes(
        write_document(subjects_to_element(updated_subjects)))
    (corpus_dir / "split_report.xml").write_bytes(split_report_document(report))
    (corpus_dir / "split_report.txt").write_text(split_report_table(report),
                                                 encoding="utf-8", newline="\n")

    index = ET.Element("curated-index")
    for segment_id in sorted(segments):
        elem = ET.SubElement(index, "segment")
        elem.set("id", segment_id)
        elem.set("quarantined", "true" if segment_id in quarantined else "false")
    (corpus_dir / "curated.xml").write_bytes(write_document(index))

    write_run_manifest(
        corpus_dir, "curate", seed,
        f"{test_fraction}|{tolerance}|{seed}".encode(), {"corpus": str(corpus_dir)})
    return CuratedCorpus(subjects=updated_subjects, sensors=sensors,
                         segments=segments, quarantined=frozenset(quarantined))


def _read_geometry_overrides(corpus_dir: Path) -> dict[str, PlatformGeometry]:
    """UAV telemetry is rendered into the raw corpus; the generator records
    it per segment in a sidecar read back here."""
    path = corpus_dir / "geometry.xml"
    out = {}
    if path.exists():
        root = parse_xml(path.read_bytes())
        for elem in root.findall("segment"):
            out[elem.get("id")] = PlatformGeometry(
                distance_m=float(elem.get("distance-m")),
                pitch_deg=float(elem.get("pitch-deg")),
            )
    return out


def load_curated(corpus_dir: str | Path) -> CuratedCorpus:
    """Reload a curated corpus from its persisted documents."""
    corpus_dir = Path(corpus_dir)
    subjects = element_to_subjects(parse_xml((corpus_dir / "subjects.xml").read_bytes()))
    sensors = {s.sensor_id: s
               for s in element_to_sensors(parse_xml((corpus_dir / "sensors.xml").read_bytes()))}
    index = parse_xml((corpus_dir / "curated.xml").read_bytes())
    segments = {}
    quarantined = set()
    for elem in index.findall("segment"):
        segment_id = elem.get("id")
        data = (corpus_dir / "segments" / f"{segment_id}.xml").read_bytes()
        try:
            segments[segment_id] = load_segment(data, sensors=sensors)
        except SchemaViolationError as exc:
            raise StageError("load", f"segment {segment_id}: {exc}") from exc
        if elem.get("quarantined") == "true":
            quarantined.add(segment_id)
    return CuratedCorpus(subjects=subjects, sensors=sensors, segments=segments,
                         quarantined=frozenset(quarantined))


# ---------------------------------------------------------------------------
# partition
# ---------------------------------------------------------------------------


def stage_partition(
    corpus_dir: str | Path,
    cfg: PartitionConfig = PartitionConfig(),
    caps: dict[Mission, int] | None = None,
    seed: int = 0,
) -> PartitionResult:
    corpus_dir = Path(corpus_dir)
    curated = load_curated(corpus_dir)
    split = {s.subject_id: s.split for s in curated.subjects}
    role = {s.subject_id: s.role for s in curated.subjects}

    lo, hi = cfg.probe_duration_s
    candidates = []
    for segment_id in sorted(curated.segments):
        segment = curated.segments[segment_id]
        sensor = curated.sensors[segment.sensor_id]
        if sensor.setting != "field":
            continue
        if segment_id in curated.quarantined:
            continue
        if role.get(segment.subject_id) != "probe-subject":
            continue
        if split.get(segment.subject_id) != "test":
            continue
        if not lo <= segment.duration_s <= hi:
            continue
        candidates.append(ProbeCandidate(
            segment=segment,
            subject_id=segment.subject_id,
            classification=classify_probe(segment, sensor, cfg=cfg),
        ))

    test_subjects = [s for s in curated.subjects if s.split == "test"]
    result = build_partition(candidates, test_subjects,
                             list(curated.segments.values()), curated.sensors,
                             cfg=cfg, caps=caps, seed=seed)

    part_dir = corpus_dir / "partition"
    cells_dir = part_dir / "cells"
    if cells_dir.exists():
        shutil.rmtree(cells_dir)  # drop stale cells from a previous partition
    cells_dir.mkdir(parents=True, exist_ok=True)
    (part_dir / "gallery.xml").write_bytes(write_sigset(result.gallery))
    (part_dir / "probes.xml").write_bytes(write_sigset(result.probes))
    (part_dir / "truth.xml").write_bytes(partition_truth_to_bytes(result))
    (part_dir / "manifest.xml").write_bytes(partition_manifest_to_bytes(result))

    for mission in sorted(Mission, key=lambda m: m.value):
        for restriction in Restriction:
            for treatment in Treatment:
                entries = result.cell_probes(mission, restriction, treatment)
                if not entries:
                    continue
                cell_set = SigSet(
                    sigset_id=f"{mission.value}--{restriction.value}--{treatment.value}",
                    kind="probe",
                    entries=tuple(
                        SigSetEntry(entry_id=e,
                                    media_refs=(result.probe_meta[e].segment_id,))
                        for e in entries
                    ),
                )
                (cells_dir / f"{cell_set.sigset_id}.xml").write_bytes(write_sigset(cell_set))

    write_run_manifest(corpus_dir, "partition", seed,
                       repr((sorted(caps.items()) if caps else None, cfg)).encode(),
                       {"corpus": str(corpus_dir), "partition": str(part_dir)})
    return result


def load_partition(corpus_dir: str | Path) -> PartitionResult:
    part_dir = Path(corpus_dir) / "partition"
    gallery = parse_sigset((part_dir / "gallery.xml").read_bytes())
    probes = parse_sigset((part_dir / "probes.xml").read_bytes())
    return partition_truth_from_bytes((part_dir / "truth.xml").read_bytes(),
                                      gallery, probes)


# ---------------------------------------------------------------------------
# evaluate / report
# ---------------------------------------------------------------------------


def _make_session(hs_spec: str):
    if hs_spec == "builtin":
        return InProcessSession(ReferenceHs())
    return open_wire_session(hs_spec)


def stage_evaluate(
    corpus_dir: str | Path,
    out_dir: str | Path,
    hs_spec: str = "builtin",
    missions: list[Mission] | None = None,
    modes: list[str] | None = None,
    profile: ConstraintProfile | None = None,
    search_k: int | None = None,
    seed: int = 0,
) -> tuple[ScoreMatrix, dict[str, dict[str, list[tuple[str, float]]]]]:
    """Enroll, ingest, verify, search; persist the score matrix.

    An HS crash mid-run persists partial scores and raises a StageError so
    the run is marked failed with a stage-tagged diagnostic.
    """
    corpus_dir = Path(corpus_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curated = load_curated(corpus_dir)
    result = load_partition(corpus_dir)
    profile = profile or default_profile()
    requested = list(modes) if modes else list(MODES)

    probe_entries_wanted = set(result.probe_meta)
    if missions:
        probe_entries_wanted = set()
        for mission in missions:
            probe_entries_wanted.update(result.mission_probes(mission))
    probe_sigset = SigSet(
        sigset_id=result.probes.sigset_id, kind="probe",
        entries=tuple(e for e in result.probes.entries
                      if e.entry_id in probe_entries_wanted))

    def media_source(segment_id: str):
        segment = curated.segments[segment_id]
        sensor = curated.sensors[segment.sensor_id]
        raw = (corpus_dir / "segments" / f"{segment_id}.brf").read_bytes()
        return segment, sensor, raw

    session = _make_session(hs_spec)
    matrix = ScoreMatrix(probe_entries=(), gallery_entries=(), modes=())
    search_results: dict[str, dict[str, list[tuple[str, float]]]] = {}
    status = "ok"
    try:
        capabilities = negotiate(session, set(requested))
        active_modes = tuple(m for m in requested if m in capabilities.supported_modes)

        gallery_handles, fte_gallery = enroll(session, result.gallery, profile, media_source)
        probe_handles, fte_probe = probe_ingest(session, probe_sigset, profile, media_source)

        matrix = ScoreMatrix(
            probe_entries=tuple(sorted(probe_handles)),
            gallery_entries=tuple(sorted(gallery_handles)),
            modes=active_modes,
            fte_gallery=tuple(sorted(fte_gallery)),
            fte_probe=tuple(sorted(fte_probe)),
            unsupported_modes=tuple(sorted(capabilities.absent_modes)),
        )
        verify(session, probe_handles, gallery_handles, active_modes, matrix)
        k = search_k or max(len(gallery_handles), 1)
        for mode in active_modes:
            search_results[mode] = search(session, probe_handles, gallery_handles, k, mode)
    except Exception as exc:
        status = "failed"
        log.error("evaluation failed mid-run: %s", exc)
        _persist_evaluation(out, hs_spec, matrix, search_results, status)
        raise StageError("evaluate", str(exc)) from exc
    finally:
        try:
            session.close()
        except Exception:  # session teardown must never mask the run outcome
            log.warning("HS session close failed", exc_info=True)

    _persist_evaluation(out, hs_spec, matrix, search_results, status)
    write_run_manifest(
        out, "evaluate", seed,
        b"|".join([
            str(corpus_dir).encode(), hs_spec.encode(),
            ",".join(sorted(m.value for m in missions) if missions else ["all"]).encode(),
            ",".join(requested).encode(),
        ]),
        {"corpus": str(corpus_dir), "out": str(out)})
    return matrix, search_results


def _persist_evaluation(out: Path, hs_spec: str, matrix: ScoreMatrix,
                        search_results, status: str) -> None:
    (out / "scores.csv").write_text(matrix.to_csv(), encoding="utf-8", newline="\n")
    lines = ["mode,probe,rank,gallery,score"]
    for mode in sorted(search_results):
        for probe in sorted(search_results[mode]):
            for rank, (gallery, value) in enumerate(search_results[mode][probe], start=1):
                lines.append(f"{mode},{probe},{rank},{gallery},{fmt_float(value)}")
    (out / "search.csv").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")

    root = ET.Element("evaluation")
    root.set("status", status)
    root.set("hs", hs_spec)
    root.set("modes", ",".join(matrix.modes))
    if matrix.unsupported_modes:
        root.set("unsupported-modes", ",".join(matrix.unsupported_modes))
    root.set("fte-gallery", ",".join(matrix.fte_gallery))
    root.set("fte-probe", ",".join(matrix.fte_probe))
    (out / "evaluation.xml").write_bytes(write_document(root))


def _load_search_csv(path: Path) -> dict[str, dict[str, list[tuple[str, float]]]]:
    results: dict[str, dict[str, list[tuple[str, float]]]] = {}
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    for line in lines[1:]:
        mode, probe, _rank, gallery, value = line.split(",")
        results.setdefault(mode, {}).setdefault(probe, []).append((gallery, float(value)))
    return results


def stage_report(corpus_dir: str | Path, out_dir: str | Path,
                 alpha: float = 0.01) -> ReportBundle:
    """Re-derive the report bundle from persisted scores and partition."""
    corpus_dir = Path(corpus_dir)
    out = Path(out_dir)
    result = load_partition(corpus_dir)
    eval_root = parse_xml((out / "evaluation.xml").read_bytes())
    matrix = ScoreMatrix.from_csv(
        (out / "scores.csv").read_text(encoding="utf-8"),
        fte_gallery=tuple(v for v in eval_root.get("fte-gallery", "").split(",") if v),
        fte_probe=tuple(v for v in eval_root.get("fte-probe", "").split(",") if v),
        unsupported_modes=tuple(
            v for v in (eval_root.get("unsupported-modes") or "").split(",") if v),
    )
    search_results = _load_search_csv(out / "search.csv") if (out / "search.csv").exists() else None
    if (out / "report").exists():
        shutil.rmtree(out / "report")  # drop stale figures from a previous run
    bundle = mission_report(matrix, result, out / "report",
                            search_results=search_results, alpha=alpha)
    write_run_manifest(out, "report", 0, f"{alpha}".encode(),
                       {"corpus": str(corpus_dir), "report": str(out / "report")})
    return bundle


def run_evaluation(
    corpus_dir: str | Path,
    out_dir: str | Path,
    hs_spec: str = "builtin",
    missions: list[Mission] | None = None,
    modes: list[str] | None = None,
    profile: ConstraintProfile | None = None,
    alpha: float = 0.01,
    seed: int = 0,
) -> ReportBundle:
    """Full evaluation: enroll, ingest, verify/search, metrics, report."""
    stage_evaluate(corpus_dir, out_dir, hs_spec=hs_spec, missions=missions,
                   modes=modes, profile=profile, seed=seed)
    return stage_report(corpus_dir, out_dir, alpha=alpha)


def load_profile(path: str | Path | None) -> ConstraintProfile:
    if path is None:
        return default_profile()
    return profile_from_bytes(Path(path).read_bytes())
