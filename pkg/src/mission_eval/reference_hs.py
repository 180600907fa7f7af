"""In-process reference holistic solution (the controllable system under test).

Templates are quality-weighted means of per-frame observations, renormalized
to unit length; single-mode scores are cosine similarities; fusion min-max
normalizes each mode over the gallery for the given probe and takes a
weighted mean over the modes present.

Arithmetic discipline: reductions run in sequential index order in IEEE
double precision and results are rounded to float32 at the API boundary.
Both choices are deliberate so that an out-of-process implementation doing
the same sequential math produces bit-identical scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .brf import BrfFrame, BrfPayload, read_brf

__all__ = [
    "MODES",
    "SINGLE_MODES",
    "HsMediaError",
    "Template",
    "build_template",
    "score",
    "minmax_normalize",
    "fuse",
    "ReferenceHs",
]

SINGLE_MODES = ("face", "body", "gait")
MODES = SINGLE_MODES + ("fusion",)


class HsMediaError(ValueError):
    """Media payload could not be ingested."""


def _f32(x: float) -> float:
    import struct

    return struct.unpack("<f", struct.pack("<f", x))[0]


@dataclass(frozen=True)
class Template:
    vectors: dict[str, tuple[float, ...]]   # modality -> unit vector (f32 values)
    qualities: dict[str, float]             # modality -> mean frame quality

    def modalities(self) -> set[str]:
        return set(self.vectors)


def build_template(frames: list[BrfFrame], modalities=SINGLE_MODES) -> Template:
    """Quality-weighted mean of frame observations per modality, renormalized.

    A modality is present only if at least one frame carries it.
    """
    vectors: dict[str, tuple[float, ...]] = {}
    qualities: dict[str, float] = {}
    for modality in modalities:
        acc: list[float] | None = None
        q_sum = 0.0
        count = 0
        for frame in frames:
            obs = frame.observations.get(modality)
            if obs is None:
                continue
            values = obs.vector.tolist()
            q = float(obs.quality)
            if acc is None:
                acc = [0.0] * len(values)
            for j, x in enumerate(values):
                acc[j] += q * x
            q_sum += q
            count += 1
        if acc is None:
            continue
        norm_sq = 0.0
        for value in acc:
            norm_sq += value * value
        norm = math.sqrt(norm_sq)
        if norm == 0.0:
            continue
        vectors[modality] = tuple(_f32(value / norm) for value in acc)
        qualities[modality] = _f32(q_sum / count)
    return Template(vectors=vectors, qualities=qualities)


def score(a: Template, b: Template, mode: str) -> float | None:
    """Cosine similarity for a single mode; None if either side lacks it.

    Fusion is a gallery-context operation: see ReferenceHs.verify.
    """
    if mode not in SINGLE_MODES:
        raise ValueError(f"score() handles single modes only, got {mode!r}")
    va = a.vectors.get(mode)
    vb = b.vectors.get(mode)
    if va is None or vb is None:
        return None
    dot = 0.0
    for x, y in zip(va, vb):
        dot += x * y
    return _f32(dot)


def minmax_normalize(scores: list[float | None]) -> list[float | None]:
    """Min-max over the non-null entries; a degenerate range maps to 0.5."""
    present = [s for s in scores if s is not None]
    if not present:
        return list(scores)
    lo, hi = min(present), max(present)
    if hi == lo:
        return [None if s is None else 0.5 for s in scores]
    return [None if s is None else (s - lo) / (hi - lo) for s in scores]


def fuse(mode_scores: dict[str, float | None], weights: dict[str, float] | None = None) -> float | None:
    """Weighted mean over available (already normalized) mode scores, with the
    weights renormalized to the modes actually present."""
    if weights is None:
        weights = {m: 1.0 for m in SINGLE_MODES}
    num = 0.0
    den = 0.0
    for mode in SINGLE_MODES:
        value = mode_scores.get(mode)
        if value is None:
            continue
        w = weights.get(mode, 0.0)
        num += w * value
        den += w
    if den == 0.0:
        return None
    return _f32(num / den)


@dataclass
class _Entry:
    handle: str
    kind: str
    tracklet_templates: list[Template]

    def best_template(self) -> Template:
        return self.tracklet_templates[0]


@dataclass
class ReferenceHs:
    """Session-scoped reference matcher; state dropped when discarded."""

    supported_modes: tuple[str, ...] = MODES
    fusion_weights: dict[str, float] = field(
        default_factory=lambda: {m: 1.0 for m in SINGLE_MODES})
    _entries: dict[str, _Entry] = field(default_factory=dict)
    _counters: dict[str, int] = field(default_factory=lambda: {"gallery": 0, "probe": 0})

    # -- session ------------------------------------------------------------

    def hello(self, version: int, requested_modes: set[str]) -> set[str]:
        return set(self.supported_modes) & set(requested_modes)

    def configure(self, profile_xml: bytes) -> None:
        # the reference matcher has no tunable ingest behavior
        return None

    def close(self) -> None:
        self._entries.clear()

    # -- ingest -------------------------------------------------------------

    def ingest(self, entry_id: str, kind: str, metadata_xml: bytes,
               payloads: list[bytes]) -> str:
        if not payloads:
            raise HsMediaError(f"entry {entry_id}: no media")
        parsed: list[BrfPayload] = []
        for raw in payloads:
            try:
                parsed.append(read_brf(raw))
            except ValueError as exc:
                raise HsMediaError(f"entry {entry_id}: {exc}") from exc
        if kind == "gallery":
            # an enrollment produces a single template over all media
            frames: list[BrfFrame] = []
            for payload in parsed:
                frames.extend(payload.frames)
            templates = [build_template(frames)]
        else:
            # one tracklet per contiguous media track
            templates = [build_template(list(p.frames)) for p in parsed]
        self._counters[kind] += 1
        prefix = "G" if kind == "gallery" else "P"
        handle = f"{prefix}{self._counters[kind]:06d}"
        self._entries[handle] = _Entry(handle=handle, kind=kind,
                                       tracklet_templates=templates)
        return handle

    # -- matching -----------------------------------------------------------

    def _pair_mode_score(self, probe: _Entry, gallery: _Entry, mode: str) -> float | None:
        best: float | None = None
        for template in probe.tracklet_templates:
            value = score(template, gallery.best_template(), mode)
            if value is not None and (best is None or value > best):
                best = value
        return best

    def verify(self, probe_handle: str, gallery_handles: list[str],
               mode: str) -> list[float | None]:
        probe = self._entries[probe_handle]
        galleries = [self._entries[h] for h in gallery_handles]
        if mode in SINGLE_MODES:
            return [self._pair_mode_score(probe, g, mode) for g in galleries]
        if mode != "fusion":
            raise ValueError(f"unknown mode {mode!r}")
        per_mode: dict[str, list[float | None]] = {}
        for m in SINGLE_MODES:
            raw = [self._pair_mode_score(probe, g, m) for g in galleries]
            per_mode[m] = minmax_normalize(raw)
        fused = []
        for i in range(len(galleries)):
            fused.append(fuse({m: per_mode[m][i] for m in SINGLE_MODES},
                              self.fusion_weights))
        return fused

    def search(self, probe_handle: str, k: int, mode: str) -> list[tuple[str, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        gallery_handles = sorted(h for h, e in self._entries.items() if e.kind == "gallery")
        scores = self.verify(probe_handle, gallery_handles, mode)
        ranked = [(h, s) for h, s in zip(gallery_handles, scores) if s is not None]
        # descending score; ties broken by ascending handle for determinism
        ranked.sort(key=lambda pair: (-pair[1], pair[0]))
        return ranked[: min(k, len(ranked))]
