"""Per-mission report bundle: ROC tables, TAR@FAR summaries, plots.

Outputs are pure functions of the score matrix plus the partition truth, and
every writer is canonical, so identical inputs produce a byte-identical
bundle.  SVG figures are emitted directly (simple line and bar plots) to
keep the bundle self-contained and dependency-free.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .harness import ScoreMatrix
from .metrics import RocCurve, cmc, label_pairs, roc, tar_at_far
from .partition import Mission, PartitionResult, Restriction, Treatment
from .xmlio import fmt_float, write_document

__all__ = ["CellResult", "ReportBundle", "mission_report", "svg_line_plot", "svg_bar_chart"]

_MODE_ORDER = ("face", "body", "gait", "fusion")
_PALETTE = ("#1f6f8b", "#c84b31", "#2d6a4f", "#7b2d8b", "#b8860b", "#444444")


@dataclass(frozen=True)
class CellResult:
    mission: Mission
    mode: str
    restriction: str      # face-included | face-restricted | all
    treatment: str        # control | treatment | all
    curve: RocCurve | None
    tar_at_far: float | None
    n_subjects: int
    n_samples: int

    @property
    def has_data(self) -> bool:
        return self.curve is not None


@dataclass
class ReportBundle:
    cells: list[CellResult]
    rank1: dict[tuple[str, str], float]     # (mission value, mode) -> rank-1 rate
    alpha: float
    fte_gallery: tuple[str, ...]
    fte_probe: tuple[str, ...]
    unsupported_modes: tuple[str, ...]

    def cell(self, mission: Mission, mode: str, restriction: str = "all",
             treatment: str = "all") -> CellResult | None:
        for cell in self.cells:
            if (cell.mission is mission and cell.mode == mode
                    and cell.restriction == restriction and cell.treatment == treatment):
                return cell
        return None


# ---------------------------------------------------------------------------
# SVG emission
# ---------------------------------------------------------------------------


def _svg_header(width: int, height: int, title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]


def svg_line_plot(
    series: list[tuple[str, np.ndarray, np.ndarray]],
    title: str,
    xlabel: str,
    ylabel: str,
    width: int = 560,
    height: int = 420,
    log_x: bool = False,
) -> str:
    """Self-contained SVG line plot; axes fixed to [0, 1] unless log_x."""
    left, right, top, bottom = 60, 20, 34, 48
    pw, ph = width - left - right, height - top - bottom

    def x_pos(x: float) -> float:
        if log_x:
            floor = 1e-4
            x = max(x, floor)
            return left + pw * (np.log10(x) - np.log10(floor)) / (0.0 - np.log10(floor))
        return left + pw * x

    def y_pos(y: float) -> float:
        return top + ph * (1.0 - y)

    out = _svg_header(width, height, title)
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" '
               f'fill="none" stroke="#888"/>')
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        ty = y_pos(tick)
        out.append(f'<line x1="{left}" y1="{ty:.1f}" x2="{left + pw}" y2="{ty:.1f}" '
                   f'stroke="#eee"/>')
        out.append(f'<text x="{left - 6}" y="{ty + 4:.1f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">{tick:g}</text>')
        if not log_x:
            tx = x_pos(tick)
            out.append(f'<text x="{tx:.1f}" y="{height - bottom + 14}" text-anchor="middle" '
                       f'font-family="sans-serif" font-size="10">{tick:g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{xlabel}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{ylabel}</text>')

    for idx, (label, xs, ys) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        points = " ".join(f"{x_pos(float(x)):.2f},{y_pos(float(y)):.2f}"
                          for x, y in zip(xs, ys))
        out.append(f'<polyline points="{points}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"/>')
        ly = top + 16 + 14 * idx
        out.append(f'<line x1="{left + pw - 120}" y1="{ly - 4}" x2="{left + pw - 100}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw - 95}" y="{ly}" font-family="sans-serif" '
                   f'font-size="10">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_bar_chart(
    groups: list[tuple[str, list[tuple[str, float | None]]]],
    title: str,
    ylabel: str,
    width: int = 720,
    height: int = 420,
) -> str:
    """Grouped bar chart; None values render as hatched 'no data' stubs."""
    left, right, top, bottom = 60, 20, 34, 64
    pw, ph = width - left - right, height - top - bottom
    out = _svg_header(width, height, title)
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" '
               f'fill="none" stroke="#888"/>')
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        ty = top + ph * (1.0 - tick)
        out.append(f'<line x1="{left}" y1="{ty:.1f}" x2="{left + pw}" y2="{ty:.1f}" '
                   f'stroke="#eee"/>')
        out.append(f'<text x="{left - 6}" y="{ty + 4:.1f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">{tick:g}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{ylabel}</text>')

    n_groups = max(len(groups), 1)
    group_w = pw / n_groups
    for g_idx, (group_label, bars) in enumerate(groups):
        gx = left + g_idx * group_w
        n_bars = max(len(bars), 1)
        bar_w = group_w * 0.8 / n_bars
        for b_idx, (bar_label, value) in enumerate(bars):
            color = _PALETTE[b_idx % len(_PALETTE)]
            bx = gx + group_w * 0.1 + b_idx * bar_w
            if value is None:
                by = top + ph - 4
                out.append(f'<rect x="{bx:.1f}" y="{by:.1f}" width="{bar_w * 0.9:.1f}" '
                           f'height="4" fill="#ccc"/>')
            else:
                bh = ph * value
                by = top + ph - bh
                out.append(f'<rect x="{bx:.1f}" y="{by:.1f}" width="{bar_w * 0.9:.1f}" '
                           f'height="{bh:.1f}" fill="{color}"/>')
            if g_idx == 0:
                ly = top + 16 + 14 * b_idx
                out.append(f'<rect x="{left + pw - 118}" y="{ly - 9}" width="10" height="10" '
                           f'fill="{color}"/>')
                out.append(f'<text x="{left + pw - 104}" y="{ly}" font-family="sans-serif" '
                           f'font-size="10">{bar_label}</text>')
        out.append(f'<text x="{gx + group_w / 2:.1f}" y="{height - bottom + 16}" '
                   f'text-anchor="middle" font-family="sans-serif" font-size="9" '
                   f'transform="rotate(30 {gx + group_w / 2:.1f} {height - bottom + 16})">'
                   f'{group_label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------


def _restriction_filter(name: str) -> Restriction | None:
    return None if name == "all" else Restriction(name)


def _treatment_filter(name: str) -> Treatment | None:
    return None if name == "all" else Treatment(name)


_CELL_COMBOS = (
    ("all", "all"),
    (Restriction.FACE_INCLUDED.value, "all"),
    (Restriction.FACE_RESTRICTED.value, "all"),
    ("all", Treatment.CONTROL.value),
    ("all", Treatment.TREATMENT.value),
)


def _compute_cell(matrix: ScoreMatrix, partition: PartitionResult, mission: Mission,
                  mode: str, restriction: str, treatment: str, alpha: float) -> CellResult:
    probes = partition.cell_probes(
        mission, _restriction_filter(restriction), _treatment_filter(treatment))
    subjects = {partition.probe_meta[e].subject_id for e in probes}
    if not probes:
        return CellResult(mission, mode, restriction, treatment, None, None, 0, 0)
    genuine, impostor = label_pairs(
        matrix, partition.probe_truth(), partition.gallery_truth, mode, probes=probes)
    if not genuine or not impostor:
        return CellResult(mission, mode, restriction, treatment, None, None,
                          len(subjects), len(probes))
    curve = roc(genuine, impostor)
    return CellResult(mission, mode, restriction, treatment, curve,
                      tar_at_far(curve, alpha), len(subjects), len(probes))


def compute_report(
    matrix: ScoreMatrix,
    partition: PartitionResult,
    search_results: dict[str, dict[str, list[tuple[str, float]]]] | None = None,
    alpha: float = 0.01,
) -> ReportBundle:
    modes = [m for m in _MODE_ORDER if m in matrix.modes]
    cells = []
    for mission in sorted(Mission, key=lambda m: m.value):
        for mode in modes:
            for restriction, treatment in _CELL_COMBOS:
                cells.append(_compute_cell(matrix, partition, mission, mode,
                                           restriction, treatment, alpha))
    rank1: dict[tuple[str, str], float] = {}
    if search_results:
        for mode, per_probe in sorted(search_results.items()):
            for mission in sorted(Mission, key=lambda m: m.value):
                probes = set(partition.mission_probes(mission))
                subset = {p: r for p, r in per_probe.items() if p in probes}
                if not subset:
                    continue
                curve = cmc(subset, partition.probe_truth(), partition.gallery_truth)
                if curve.rank_hit_rate.size:
                    rank1[(mission.value, mode)] = float(curve.rank_hit_rate[0])
    return ReportBundle(
        cells=cells,
        rank1=rank1,
        alpha=alpha,
        fte_gallery=matrix.fte_gallery,
        fte_probe=matrix.fte_probe,
        unsupported_modes=matrix.unsupported_modes,
    )


def _roc_csv(bundle: ReportBundle) -> str:
    """Exact sweep rows for the aggregate (all, all) cell of each mission/mode."""
    lines = ["mission,mode,restriction,treatment,threshold,far,tar"]
    for cell in bundle.cells:
        if cell.restriction != "all" or cell.treatment != "all" or not cell.has_data:
            continue
        curve = cell.curve
        for t, far, tar in zip(curve.thresholds, curve.far, curve.tar):
            t_txt = "-inf" if t == -np.inf else ("inf" if t == np.inf else fmt_float(float(t)))
            lines.append(
                f"{cell.mission.value},{cell.mode},{cell.restriction},{cell.treatment},"
                f"{t_txt},{fmt_float(float(far))},{fmt_float(float(tar))}")
    return "\n".join(lines) + "\n"


def _summary_xml(bundle: ReportBundle) -> bytes:
    root = ET.Element("evaluation-summary")
    root.set("alpha", fmt_float(bundle.alpha))
    root.set("fte-gallery", str(len(bundle.fte_gallery)))
    root.set("fte-probe", str(len(bundle.fte_probe)))
    if bundle.unsupported_modes:
        root.set("unsupported-modes", ",".join(sorted(bundle.unsupported_modes)))
    for cell in bundle.cells:
        elem = ET.SubElement(root, "cell")
        elem.set("mission", cell.mission.value)
        elem.set("mode", cell.mode)
        elem.set("restriction", cell.restriction)
        elem.set("treatment", cell.treatment)
        elem.set("subjects", str(cell.n_subjects))
        elem.set("samples", str(cell.n_samples))
        elem.set("table-form", f"{cell.n_subjects}/{cell.n_samples}")
        if cell.has_data:
            elem.set("tar-at-far", fmt_float(cell.tar_at_far))
        else:
            elem.set("status", "no-data")
    for (mission, mode), value in sorted(bundle.rank1.items()):
        elem = ET.SubElement(root, "rank1")
        elem.set("mission", mission)
        elem.set("mode", mode)
        elem.set("rate", fmt_float(value))
    return write_document(root)


def _report_text(bundle: ReportBundle) -> str:
    lines = [
        f"mission evaluation summary  (operating point: TAR @ FAR <= {bundle.alpha:g})",
        f"failed enrollments: {len(bundle.fte_gallery)}   "
        f"failed probe ingests: {len(bundle.fte_probe)}",
    ]
    if bundle.unsupported_modes:
        lines.append("unsupported modes: " + ", ".join(sorted(bundle.unsupported_modes)))
    lines.append("")
    lines.append(f"{'mission':24s} {'mode':8s} {'subjects/samples':>16s} {'TAR@FAR':>10s}")
    for cell in bundle.cells:
        if cell.restriction != "all" or cell.treatment != "all":
            continue
        value = f"{cell.tar_at_far:.4f}" if cell.has_data else "no data"
        lines.append(f"{cell.mission.value:24s} {cell.mode:8s} "
                     f"{cell.n_subjects}/{cell.n_samples:<15d} {value:>10s}")
    return "\n".join(lines) + "\n"


def _mission_roc_svg(bundle: ReportBundle, mission: Mission) -> str | None:
    series = []
    for mode in _MODE_ORDER:
        cell = bundle.cell(mission, mode)
        if cell is not None and cell.has_data:
            order = np.argsort(cell.curve.far, kind="stable")
            series.append((mode, cell.curve.far[order], cell.curve.tar[order]))
    if not series:
        return None
    return svg_line_plot(series, f"{mission.value}: ROC by mode",
                         "false accept rate", "true accept rate")


def _comparison_svg(bundle: ReportBundle, missions: list[Mission], mode: str,
                    title: str) -> str | None:
    series = []
    for mission in missions:
        cell = bundle.cell(mission, mode)
        if cell is not None and cell.has_data:
            order = np.argsort(cell.curve.far, kind="stable")
            series.append((mission.value, cell.curve.far[order], cell.curve.tar[order]))
    if not series:
        return None
    return svg_line_plot(series, title, "false accept rate", "true accept rate")


def _modes_bar_svg(bundle: ReportBundle) -> str:
    groups = []
    for mission in sorted(Mission, key=lambda m: m.value):
        bars = []
        for mode in _MODE_ORDER:
            cell = bundle.cell(mission, mode)
            bars.append((mode, cell.tar_at_far if cell and cell.has_data else None))
        groups.append((mission.value, bars))
    return svg_bar_chart(groups, f"TAR @ {bundle.alpha:g} FAR by mission and mode",
                         "TAR @ FAR")


def mission_report(
    matrix: ScoreMatrix,
    partition: PartitionResult,
    out_dir: str | Path,
    search_results: dict[str, dict[str, list[tuple[str, float]]]] | None = None,
    alpha: float = 0.01,
) -> ReportBundle:
    """Compute and write the full report bundle; returns the computed bundle."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = compute_report(matrix, partition, search_results=search_results, alpha=alpha)

    (out / "roc_curves.csv").write_text(_roc_csv(bundle), encoding="utf-8", newline="\n")
    (out / "summary.xml").write_bytes(_summary_xml(bundle))
    (out / "report.txt").write_text(_report_text(bundle), encoding="utf-8", newline="\n")

    for mission in sorted(Mission, key=lambda m: m.value):
        svg = _mission_roc_svg(bundle, mission)
        if svg is not None:
            (out / f"roc_{mission.value}.svg").write_text(svg, encoding="utf-8", newline="\n")
    (out / "modes_summary.svg").write_text(_modes_bar_svg(bundle), encoding="utf-8",
                                           newline="\n")
    comparison = _comparison_svg(
        bundle, [Mission.EXPERIMENTAL_CONTROL, Mission.ELEVATED, Mission.UAV],
        "fusion", "control vs elevated vs uav: fusion ROC")
    if comparison is not None:
        (out / "treatment_comparison.svg").write_text(comparison, encoding="utf-8",
                                                      newline="\n")
    focus = _comparison_svg(bundle, [Mission.TURBULENCE, Mission.GAIT], "fusion",
                            "turbulence and gait: fusion ROC")
    if focus is not None:
        (out / "focus_missions.svg").write_text(focus, encoding="utf-8", newline="\n")
    return bundle
