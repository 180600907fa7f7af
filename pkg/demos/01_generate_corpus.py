"""
Generate a synthetic collection event
=====================================

Builds a small deterministic corpus (subjects, sensors, weather series,
activity schedule, binary segment payloads) and prints what came out.
"""

import tempfile
from collections import Counter
from pathlib import Path

from mission_eval import GeneratorConfig, generate_event, write_corpus
from mission_eval.brf import read_brf

config = GeneratorConfig(seed=7, n_subjects=6, distractor_fraction=0.2)
corpus = generate_event(config)

print(f"subjects: {len(corpus.subjects)} "
      f"({sum(1 for s in corpus.subjects if s.role == 'distractor')} distractors)")
print(f"sensors:  {len(corpus.sensors)}")
print(f"segments: {len(corpus.segments)}")
print(f"weather minutes: {len(corpus.weather)}")

by_activity = Counter(s.activity for s in corpus.segments)
print("\nsegments per activity:")
for activity, count in sorted(by_activity.items()):
    print(f"  {activity:16s} {count}")

# peek inside one payload
segment = corpus.segments[0]
payload = read_brf(corpus.payloads[segment.segment_id])
frame = payload.frames[0]
print(f"\nfirst segment {segment.segment_id}")
print(f"  activity={segment.activity} frames={len(payload.frames)}")
print(f"  head bbox h={frame.head_bbox[3]:.0f} px, "
      f"yaw={frame.yaw_deg:.1f} deg")
for name, obs in sorted(frame.observations.items()):
    print(f"  {name:5s} dim={obs.vector.shape[0]} quality={obs.quality:.3f}")

# write to disk; same seed always produces byte-identical files
with tempfile.TemporaryDirectory() as out:
    write_corpus(corpus, out)
    n_files = sum(1 for p in Path(out).rglob("*") if p.is_file())
    print(f"\nwrote {n_files} files")
