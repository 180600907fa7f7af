"""
Talk to a matcher over the wire protocol
========================================

Launches the reference matcher as a child process speaking the
length-prefixed binary protocol on stdio, negotiates modes, enrolls two
subjects, and runs verify/search: exactly what `--hs exec:...` does inside
the evaluation pipeline.
"""

import sys

from mission_eval.conformance import conformance_media, protocol_check
from mission_eval.harness import open_wire_session

spec = f"exec:{sys.executable} -m mission_eval.hs_server"
session = open_wire_session(spec)

modes = session.hello({"face", "body", "gait", "fusion"})
print(f"negotiated modes: {sorted(modes)}")
session.configure(b'<?xml version="1.0" encoding="UTF-8"?>\n<constraint-profile/>\n')

g1 = session.ingest("g-ada", "gallery", b"", [conformance_media(1)])
g2 = session.ingest("g-ben", "gallery", b"", [conformance_media(2)])
p1 = session.ingest("p-unknown", "probe", b"",
                    [conformance_media(1, segment_id="probe-seg")])
print(f"handles: gallery={g1},{g2} probe={p1}")

for mode in ("face", "body", "gait", "fusion"):
    scores = session.verify(p1, [g1, g2], mode)
    print(f"verify {mode:6s} -> {['%.4f' % s for s in scores]}")

ranked = session.search(p1, 2, "fusion")
print(f"search fusion -> {[(h, '%.4f' % s) for h, s in ranked]}")
session.close()

# the conformance suite runs these exchanges plus the error paths
ok, results = protocol_check(spec)
print()
for result in results:
    print(result.line())
print(f"\nconformance: {'all green' if ok else 'FAILURES'}")
