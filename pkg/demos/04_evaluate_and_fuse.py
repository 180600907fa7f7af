"""
Score a corpus and read ROC / TAR@FAR / fusion numbers
======================================================

Full loop against the in-process reference matcher: enroll the gallery,
ingest probes, verify every pair in all four modes, then compare single
modalities against score-level fusion per mission.
"""

import tempfile
from pathlib import Path

from mission_eval import GeneratorConfig, Mission
from mission_eval.pipeline import (
    run_evaluation,
    stage_curate,
    stage_generate,
    stage_partition,
)

with tempfile.TemporaryDirectory() as root:
    corpus = Path(root) / "corpus"
    out = Path(root) / "out"
    # long-range turbulence regime: face quality collapses, body carries
    config = GeneratorConfig(
        seed=23, n_subjects=10, distractor_fraction=0.2,
        cn2_range=(3e-14, 3e-14), kappa_face=4e11,
        field_activities=("structured-walk", "random-walk"))
    stage_generate(config, corpus)
    stage_curate(corpus, seed=23)
    stage_partition(corpus, seed=23)

    bundle = run_evaluation(corpus, out, seed=23)

    print(f"{'mission':24s} {'face':>7s} {'body':>7s} {'gait':>7s} {'fusion':>7s}")
    for mission in sorted(Mission, key=lambda m: m.value):
        row = [f"{mission.value:24s}"]
        any_data = False
        for mode in ("face", "body", "gait", "fusion"):
            cell = bundle.cell(mission, mode)
            if cell is not None and cell.has_data:
                row.append(f"{cell.tar_at_far:7.3f}")
                any_data = True
            else:
                row.append(f"{'-':>7s}")
        if any_data:
            print(" ".join(row))

    print("\nrank-1 identification (search):")
    for (mission, mode), rate in sorted(bundle.rank1.items()):
        if mode == "fusion":
            print(f"  {mission:24s} {rate:.3f}")

    files = sorted(p.name for p in (out / "report").iterdir())
    print(f"\nreport bundle: {', '.join(files)}")
