"""Genuine/impostor labeling, exact step-function ROC, TAR@FAR, CMC.

Conventions, fixed and documented because they move the headline numbers:

* acceptance rule is score >= threshold (ties accept);
* the ROC is the exact step function over all distinct observed scores, with
  a -inf sentinel (accept everything) and a +inf sentinel (accept nothing);
  no interpolation anywhere;
* a null score is never accepted at any threshold: a null genuine is a miss,
  a null impostor is a correct rejection (the failure-to-enroll policy).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .harness import ScoreMatrix

__all__ = [
    "RocCurve",
    "label_pairs",
    "roc",
    "tar_at_far",
    "CmcCurve",
    "cmc",
]


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray   # ascending; [-inf, distinct scores..., +inf]
    far: np.ndarray          # fraction of impostor scores >= t
    tar: np.ndarray          # fraction of genuine scores >= t
    n_genuine: int
    n_impostor: int

    def area(self) -> float:
        """Trapezoidal area under (FAR, TAR), FAR ascending."""
        order = np.argsort(self.far, kind="stable")
        return float(np.trapezoid(self.tar[order], self.far[order]))


def label_pairs(
    matrix: ScoreMatrix,
    probe_truth: dict[str, str],
    gallery_truth: dict[str, str],
    mode: str,
    probes: list[str] | None = None,
) -> tuple[list[float | None], list[float | None]]:
    """Split the score matrix into genuine and impostor score lists.

    Every probe and gallery entry must resolve to ground truth; anything
    unresolvable is a harness bookkeeping bug and raises.  Failed-to-ingest
    probes and failed-to-enroll gallery entries contribute explicit nulls.
    """
    if probes is None:
        probes = sorted(set(matrix.probe_entries) | set(matrix.fte_probe))
    galleries = sorted(set(matrix.gallery_entries) | set(matrix.fte_gallery))
    genuine: list[float | None] = []
    impostor: list[float | None] = []
    for probe in probes:
        if probe not in probe_truth:
            raise KeyError(f"no ground truth for probe entry {probe!r}")
        p_subject = probe_truth[probe]
        for gallery in galleries:
            if gallery not in gallery_truth:
                raise KeyError(f"no ground truth for gallery entry {gallery!r}")
            value = matrix.get(probe, gallery, mode)
            if gallery_truth[gallery] == p_subject:
                genuine.append(value)
            else:
                impostor.append(value)
    return genuine, impostor


def roc(genuine: list[float | None], impostor: list[float | None]) -> RocCurve:
    """Exact threshold sweep over all distinct scores."""
    if not genuine or not impostor:
        raise ValueError("roc needs at least one genuine and one impostor score")
    g = np.sort(np.array([s for s in genuine if s is not None], dtype=float))
    i = np.sort(np.array([s for s in impostor if s is not None], dtype=float))
    n_genuine = len(genuine)
    n_impostor = len(impostor)

    core = np.unique(np.concatenate([g, i])) if (g.size or i.size) else np.array([])
    thresholds = np.concatenate([[-np.inf], core, [np.inf]])
    # count(x >= t) via binary search on the sorted score arrays
    tar = (g.size - np.searchsorted(g, thresholds, side="left")) / n_genuine
    far = (i.size - np.searchsorted(i, thresholds, side="left")) / n_impostor
    return RocCurve(thresholds=thresholds, far=far, tar=tar,
                    n_genuine=n_genuine, n_impostor=n_impostor)


def tar_at_far(curve: RocCurve, alpha: float) -> float:
    """TAR at the most permissive threshold whose FAR does not exceed alpha.

    Step semantics, no interpolation.  The +inf sentinel (accept nothing)
    guarantees some threshold qualifies.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    qualifying = np.nonzero(curve.far <= alpha)[0]
    return float(curve.tar[qualifying[0]])


@dataclass(frozen=True)
class CmcCurve:
    rank_hit_rate: np.ndarray   # index k-1 -> fraction of probes with mate in top k
    n_evaluated: int
    n_excluded: int             # probes with no mate in the gallery


def cmc(
    results: dict[str, list[tuple[str, float]]],
    probe_truth: dict[str, str],
    gallery_truth: dict[str, str],
    max_rank: int | None = None,
) -> CmcCurve:
    """Rank-k identification rate from per-probe ranked search results."""
    gallery_subjects = set(gallery_truth.values())
    if max_rank is None:
        max_rank = max((len(r) for r in results.values()), default=0)
    hits = np.zeros(max_rank, dtype=float)
    evaluated = 0
    excluded = 0
    for probe, ranked in sorted(results.items()):
        subject = probe_truth[probe]
        if subject not in gallery_subjects:
            excluded += 1
            continue
        evaluated += 1
        for position, (gallery_entry, _score) in enumerate(ranked[:max_rank], start=1):
            if gallery_truth[gallery_entry] == subject:
                hits[position - 1 :] += 1.0
                break
    if evaluated == 0:
        raise ValueError("no probes with mates in the gallery")
    return CmcCurve(rank_hit_rate=hits / evaluated, n_evaluated=evaluated,
                    n_excluded=excluded)
