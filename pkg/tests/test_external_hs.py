"""Secondary criterion: the TypeScript stdio matcher is protocol-conformant
and numerically identical to the in-process reference."""

import hashlib
import shutil
import subprocess
from pathlib import Path

import pytest

from mission_eval.conformance import golden_transcript, protocol_check
from mission_eval.pipeline import stage_evaluate, stage_report

EXTERNAL_DIR = Path(__file__).resolve().parent.parent / "external_hs"
SERVER = EXTERNAL_DIR / "dist" / "main.js"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None, reason="node unavailable")


@pytest.fixture(scope="session")
def node_server() -> str:
    if not SERVER.exists():
        if shutil.which("npm") is None:
            pytest.skip("external_hs not built and npm unavailable")
        subprocess.run(["npm", "install"], cwd=EXTERNAL_DIR, check=True,
                       capture_output=True)
        subprocess.run(["npm", "run", "build"], cwd=EXTERNAL_DIR, check=True,
                       capture_output=True)
    return f"exec:node {SERVER}"


def test_golden_transcript_bitwise(node_server):
    request, golden = golden_transcript()
    result = subprocess.run(["node", str(SERVER)], input=request,
                            capture_output=True, timeout=60)
    assert result.returncode == 0
    assert result.stdout == golden


def test_structural_conformance(node_server):
    ok, results = protocol_check(node_server)
    for check in results:
        print(check.line())
    assert ok, [r.name for r in results if not r.passed]


def test_score_matrix_and_report_parity(node_server, small_corpus, tmp_path):
    builtin_matrix, _ = stage_evaluate(small_corpus, tmp_path / "builtin", seed=42)
    node_matrix, _ = stage_evaluate(small_corpus, tmp_path / "node",
                                    hs_spec=node_server, seed=42)

    assert set(node_matrix.scores) == set(builtin_matrix.scores)
    worst = 0.0
    for key, value in builtin_matrix.scores.items():
        other = node_matrix.scores[key]
        if value is None or other is None:
            assert value == other, key
            continue
        worst = max(worst, abs(value - other))
    assert worst <= 1e-6
    # scores are in fact bit-equal, which is what makes the bundles identical
    assert node_matrix.scores == builtin_matrix.scores

    stage_report(small_corpus, tmp_path / "builtin")
    stage_report(small_corpus, tmp_path / "node")

    def bundle_hash(root: Path) -> dict[str, str]:
        return {
            p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted((root / "report").rglob("*")) if p.is_file()
        }

    a, b = bundle_hash(tmp_path / "builtin"), bundle_hash(tmp_path / "node")
    bundles_equal = a == b
    status = "PASS" if (worst <= 1e-6 and bundles_equal) else "FAIL"
    print(f"[{status}] protocol conformance: external HS matches reference scores "
          f"within 1e-6 and report bundles are identical  "
          f"(worst score delta={worst:.2e}, {len(a)} bundle files)")
    assert bundles_equal
