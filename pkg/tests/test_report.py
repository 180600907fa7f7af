"""Report bundle determinism, schema, and rendering."""

import hashlib
import xml.etree.ElementTree as ET
from pathlib import Path

from mission_eval.harness import ScoreMatrix
from mission_eval.partition import (
    Mission,
    PartitionResult,
    ProbeMeta,
    Restriction,
    Treatment,
)
from mission_eval.model import SigSet, SigSetEntry
from mission_eval.report import mission_report, svg_bar_chart, svg_line_plot


def tiny_partition_and_matrix():
    gallery = SigSet(
        sigset_id="gallery", kind="gallery",
        entries=(
            SigSetEntry("g--sub-0001", ("seg-g1",), "sub-0001"),
            SigSetEntry("g--sub-0002", ("seg-g2",), "sub-0002"),
        ))
    probes = SigSet(
        sigset_id="probes", kind="probe",
        entries=(
            SigSetEntry("p--seg-1", ("seg-1",)),
            SigSetEntry("p--seg-2", ("seg-2",)),
        ))
    meta = {
        "p--seg-1": ProbeMeta("p--seg-1", "seg-1", "sub-0001",
                              Restriction.FACE_INCLUDED, Treatment.CONTROL,
                              frozenset({Mission.EXPERIMENTAL_CONTROL}),
                              "cam-a", "standing"),
        "p--seg-2": ProbeMeta("p--seg-2", "seg-2", "sub-0002",
                              Restriction.FACE_RESTRICTED, Treatment.TREATMENT,
                              frozenset({Mission.EXPERIMENTAL_CONTROL,
                                         Mission.FACE_RESTRICTED}),
                              "cam-b", "structured-walk"),
    }
    partition = PartitionResult(
        gallery=gallery, probes=probes, probe_meta=meta,
        gallery_truth={"g--sub-0001": "sub-0001", "g--sub-0002": "sub-0002"})
    scores = {}
    for (p, g), v in {
        ("p--seg-1", "g--sub-0001"): 0.95,
        ("p--seg-1", "g--sub-0002"): 0.10,
        ("p--seg-2", "g--sub-0001"): 0.20,
        ("p--seg-2", "g--sub-0002"): 0.90,
    }.items():
        scores[(p, g, "face")] = v
    matrix = ScoreMatrix(
        probe_entries=("p--seg-1", "p--seg-2"),
        gallery_entries=("g--sub-0001", "g--sub-0002"),
        modes=("face",), scores=scores)
    return partition, matrix


def tree_hash(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


class TestMissionReport:
    def test_byte_identical_on_identical_inputs(self, tmp_path):
        partition, matrix = tiny_partition_and_matrix()
        mission_report(matrix, partition, tmp_path / "a")
        mission_report(matrix, partition, tmp_path / "b")
        assert tree_hash(tmp_path / "a") == tree_hash(tmp_path / "b")

    def test_csv_schema(self, tmp_path):
        partition, matrix = tiny_partition_and_matrix()
        mission_report(matrix, partition, tmp_path)
        lines = (tmp_path / "roc_curves.csv").read_text().splitlines()
        assert lines[0] == "mission,mode,restriction,treatment,threshold,far,tar"
        assert any(line.startswith("experimental-control,face,all,all,") for line in lines)

    def test_empty_cells_render_no_data(self, tmp_path):
        partition, matrix = tiny_partition_and_matrix()
        mission_report(matrix, partition, tmp_path)
        summary = ET.fromstring((tmp_path / "summary.xml").read_bytes())
        no_data = [c for c in summary.findall("cell") if c.get("status") == "no-data"]
        with_data = [c for c in summary.findall("cell") if c.get("tar-at-far")]
        assert no_data and with_data
        assert "no data" in (tmp_path / "report.txt").read_text()

    def test_counts_in_table_form(self, tmp_path):
        partition, matrix = tiny_partition_and_matrix()
        mission_report(matrix, partition, tmp_path)
        summary = ET.fromstring((tmp_path / "summary.xml").read_bytes())
        cell = next(c for c in summary.findall("cell")
                    if c.get("mission") == "experimental-control"
                    and c.get("restriction") == "all" and c.get("treatment") == "all")
        assert cell.get("table-form") == "2/2"

    def test_svgs_are_wellformed(self, tmp_path):
        partition, matrix = tiny_partition_and_matrix()
        mission_report(matrix, partition, tmp_path)
        for svg in tmp_path.glob("*.svg"):
            ET.fromstring(svg.read_text())

    def test_tar_values_match_metrics(self, tmp_path):
        from mission_eval.metrics import label_pairs, roc, tar_at_far

        partition, matrix = tiny_partition_and_matrix()
        bundle = mission_report(matrix, partition, tmp_path)
        cell = bundle.cell(Mission.EXPERIMENTAL_CONTROL, "face")
        genuine, impostor = label_pairs(matrix, partition.probe_truth(),
                                        partition.gallery_truth, "face")
        assert cell.tar_at_far == tar_at_far(roc(genuine, impostor), 0.01)


class TestSvgPrimitives:
    def test_line_plot_contains_series(self):
        import numpy as np

        svg = svg_line_plot([("face", np.array([0.0, 0.5, 1.0]),
                              np.array([0.2, 0.7, 1.0]))],
                            "t", "x", "y")
        assert "<polyline" in svg and "face" in svg
        ET.fromstring(svg)

    def test_bar_chart_handles_missing(self):
        svg = svg_bar_chart([("m1", [("face", 0.5), ("gait", None)])], "t", "y")
        assert "m1" in svg
        ET.fromstring(svg)
