"""Pipeline stage behavior and the CLI surface."""

import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from mission_eval.cli import main as cli_main
from mission_eval.harness import ScoreMatrix
from mission_eval.pipeline import (
    StageError,
    load_curated,
    load_partition,
    run_evaluation,
    stage_evaluate,
    stage_report,
)


class TestPipelineStages:
    def test_curated_corpus_reloads(self, small_corpus):
        curated = load_curated(small_corpus)
        assert curated.segments
        assert all(s.environment is not None for s in curated.segments.values())
        assert {s.split for s in curated.subjects} == {"train", "test"}

    def test_split_report_files_exist(self, small_corpus):
        assert (small_corpus / "split_report.xml").exists()
        table = (small_corpus / "split_report.txt").read_text()
        assert "TV distance" in table

    def test_segment_metadata_beside_payload(self, small_corpus):
        curated = load_curated(small_corpus)
        sid = sorted(curated.segments)[0]
        assert (small_corpus / "segments" / f"{sid}.xml").exists()
        assert (small_corpus / "segments" / f"{sid}.brf").exists()

    def test_par_cells_files_match_manifest(self, small_corpus):
        manifest = ET.fromstring((small_corpus / "partition" / "manifest.xml").read_bytes())
        for mission in manifest.findall("mission"):
            for cell in mission.findall("cell"):
                name = (f"{mission.get('id')}--{cell.get('restriction')}"
                        f"--{cell.get('treatment')}.xml")
                path = small_corpus / "partition" / "cells" / name
                if int(cell.get("samples")) > 0:
                    root = ET.fromstring(path.read_bytes())
                    assert len(root.findall("entry")) == int(cell.get("samples"))
                else:
                    assert not path.exists()

    def test_evaluate_and_report(self, small_corpus, tmp_path):
        out = tmp_path / "out"
        matrix, search_results = stage_evaluate(small_corpus, out, seed=42)
        assert matrix.scores
        assert (out / "scores.csv").exists()
        bundle = stage_report(small_corpus, out)
        assert (out / "report" / "summary.xml").exists()
        assert (out / "report" / "roc_curves.csv").exists()
        assert any(c.has_data for c in bundle.cells)

    def test_report_rederives_from_persisted_scores(self, small_corpus, tmp_path):
        out = tmp_path / "out"
        stage_evaluate(small_corpus, out, seed=42)
        first = stage_report(small_corpus, out)
        again = stage_report(small_corpus, out)
        for a, b in zip(first.cells, again.cells):
            assert a.tar_at_far == b.tar_at_far

    def test_modes_restriction(self, small_corpus, tmp_path):
        out = tmp_path / "face-only"
        matrix, _ = stage_evaluate(small_corpus, out, modes=["face"], seed=42)
        assert matrix.modes == ("face",)
        bundle = stage_report(small_corpus, out)
        modes_present = {c.mode for c in bundle.cells if c.has_data}
        assert modes_present == {"face"}

    def test_crashing_hs_marks_run_failed(self, small_corpus, tmp_path):
        out = tmp_path / "crash"
        crasher = "exec:" + sys.executable + " -c \"import sys; sys.exit(3)\""
        with pytest.raises(StageError):
            stage_evaluate(small_corpus, out, hs_spec=crasher, seed=42)
        root = ET.fromstring((out / "evaluation.xml").read_bytes())
        assert root.get("status") == "failed"
        assert (out / "scores.csv").exists()  # partial scores persisted

    def test_child_process_hs_matches_builtin(self, small_corpus, tmp_path):
        child = f"exec:{sys.executable} -m mission_eval.hs_server"
        m_builtin, _ = stage_evaluate(small_corpus, tmp_path / "a", seed=42)
        m_child, _ = stage_evaluate(small_corpus, tmp_path / "b",
                                    hs_spec=child, seed=42)
        assert m_builtin.scores == m_child.scores
        a = (tmp_path / "a" / "scores.csv").read_bytes()
        b = (tmp_path / "b" / "scores.csv").read_bytes()
        assert a == b

    def test_run_evaluation_end_to_end(self, small_corpus, tmp_path):
        bundle = run_evaluation(small_corpus, tmp_path / "full", seed=42)
        assert any(c.has_data for c in bundle.cells)


class TestCli:
    def test_schema_command(self, capsys):
        assert cli_main(["schema"]) == 0
        out = capsys.readouterr().out
        assert "wind-speed-mps" in out

    def test_generate_curate_partition_evaluate(self, tmp_path, capsys):
        corpus = str(tmp_path / "corpus")
        out = str(tmp_path / "out")
        assert cli_main(["generate", "--corpus", corpus, "--seed", "7",
                         "--subjects", "6", "--distractor-fraction", "0.17"]) == 0
        assert cli_main(["curate", "--corpus", corpus, "--seed", "7"]) == 0
        assert cli_main(["partition", "--corpus", corpus, "--seed", "7"]) == 0
        assert cli_main(["evaluate", "--corpus", corpus, "--out", out,
                         "--seed", "7", "--modes", "face,fusion"]) == 0
        captured = capsys.readouterr().out
        assert "TAR" in captured
        assert (tmp_path / "out" / "report" / "summary.xml").exists()

    def test_missions_filter(self, small_corpus, tmp_path):
        out = str(tmp_path / "gait-only")
        assert cli_main(["evaluate", "--corpus", str(small_corpus), "--out", out,
                         "--seed", "42", "--missions", "gait",
                         "--modes", "gait"]) == 0
        matrix = ScoreMatrix.from_csv((tmp_path / "gait-only" / "scores.csv").read_text())
        partition = load_partition(small_corpus)
        gait_probes = set(partition.mission_probes(
            __import__("mission_eval.partition", fromlist=["Mission"]).Mission.GAIT))
        assert set(matrix.probe_entries) <= gait_probes

    def test_generate_from_config_file(self, tmp_path):
        from mission_eval.synthgen import GeneratorConfig, generator_config_to_element
        from mission_eval.xmlio import write_document

        config = GeneratorConfig(seed=13, n_subjects=4, distractor_fraction=0.25,
                                 field_activities=("standing",))
        config_path = tmp_path / "config.xml"
        config_path.write_bytes(write_document(generator_config_to_element(config)))
        corpus = tmp_path / "corpus"
        assert cli_main(["generate", "--corpus", str(corpus),
                         "--config", str(config_path)]) == 0
        manifest = (corpus / "run_manifest_generate.xml").read_text()
        assert 'seed="13"' in manifest

    def test_report_alpha_flag(self, small_corpus, tmp_path):
        out = tmp_path / "alpha"
        stage_evaluate(small_corpus, out, modes=["body"], seed=42)
        assert cli_main(["report", "--corpus", str(small_corpus),
                         "--out", str(out), "--alpha", "0.1"]) == 0
        summary = (out / "report" / "summary.xml").read_text()
        assert 'alpha="0.1"' in summary

    def test_restricted_child_hs_negotiation(self, small_corpus, tmp_path):
        child = (f"exec:{sys.executable} -m mission_eval.hs_server "
                 f"--modes face,body,fusion")
        matrix, _ = stage_evaluate(small_corpus, tmp_path / "nogait",
                                   hs_spec=child, seed=42)
        assert matrix.unsupported_modes == ("gait",)
        assert "gait" not in matrix.modes
        root = ET.fromstring((tmp_path / "nogait" / "evaluation.xml").read_bytes())
        assert root.get("unsupported-modes") == "gait"

    def test_protocol_check_against_reference_server(self, capsys):
        spec = f"exec:{sys.executable} -m mission_eval.hs_server"
        assert cli_main(["protocol-check", "--hs", spec]) == 0
        out = capsys.readouterr().out
        assert "[PASS]" in out and "[FAIL]" not in out

    def test_console_entry_point(self):
        result = subprocess.run(
            [sys.executable, "-m", "mission_eval.cli", "schema"],
            capture_output=True, text=True)
        assert result.returncode == 0
        assert "segment" in result.stdout
