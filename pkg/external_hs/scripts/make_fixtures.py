#!/usr/bin/env python3
"""Regenerate the golden fixtures from the harness reference implementation.

Run from the repository root with the mission_eval package installed:

    python external_hs/scripts/make_fixtures.py
"""

import json
from pathlib import Path

from mission_eval.conformance import conformance_media, golden_transcript
from mission_eval.reference_hs import ReferenceHs

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)

    request, response = golden_transcript()
    (FIXTURES / "session_input.bin").write_bytes(request)
    (FIXTURES / "session_output.bin").write_bytes(response)

    media = {
        "media_1.brf": conformance_media(1),
        "media_2.brf": conformance_media(2),
        "probe.brf": conformance_media(1, segment_id="probe-seg"),
    }
    for name, raw in media.items():
        (FIXTURES / name).write_bytes(raw)

    hs = ReferenceHs()
    g1 = hs.ingest("g-1", "gallery", b"", [media["media_1.brf"]])
    g2 = hs.ingest("g-2", "gallery", b"", [media["media_2.brf"]])
    p1 = hs.ingest("p-1", "probe", b"", [media["probe.brf"]])
    expected = {
        mode: hs.verify(p1, [g1, g2], mode)
        for mode in ("face", "body", "gait", "fusion")
    }
    expected["search_fusion"] = hs.search(p1, 2, "fusion")
    (FIXTURES / "expected_scores.json").write_text(
        json.dumps(expected, indent=2, sort_keys=True) + "\n")
    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
