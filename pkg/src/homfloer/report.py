"""Artifacts of a run: CSV tables, JSON summaries and an SVG picture of the tangle."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

import numpy as np

from . import serialize
from .homology import homology_json
from .intersect import HomoclinicPoint, pair_label
from .intersect import to_csv as points_to_csv
from .tangle import classes_to_csv
from .tracer import STABLE, UNSTABLE, BranchCurve

SVG_WIDTH = 800.0
SVG_MARGIN = 20.0
MIN_PIXEL_STEP = 0.75

COLORS = {(UNSTABLE, 1): "#c0392b", (UNSTABLE, -1): "#e67e22", (STABLE, 1): "#2471a3", (STABLE, -1): "#17a589"}


def _thin(px: np.ndarray, step: float = MIN_PIXEL_STEP) -> np.ndarray:
    """Drop vertices closer than ``step`` pixels to the last kept one."""
    if len(px) <= 2:
        return px
    keep = [0]
    last = px[0]
    for i in range(1, len(px) - 1):
        if abs(px[i, 0] - last[0]) + abs(px[i, 1] - last[1]) >= step:
            keep.append(i)
            last = px[i]
    keep.append(len(px) - 1)
    return px[keep]


def emit_svg_tangle(curves: dict[tuple[str, int], BranchCurve], points: Iterable[HomoclinicPoint], path,
                    primary: Iterable[bool] | None = None, fixed_point=(0.0, 0.0)) -> int:
    """Write the tangle picture and return the number of point markers.

    Unstable branches are solid, stable branches dashed. Primary points are
    filled discs, the others open circles. The fixed point gets a square and a
    text label. Output depends only on the inputs.
    """
    points = list(points)
    flags = [True] * len(points) if primary is None else [bool(f) for f in primary]
    xy = [c.xy for c in curves.values()] + [np.asarray([fixed_point], float)]
    if points:
        xy.append(np.array([p.position for p in points], float))
    allxy = np.concatenate(xy)
    lo, hi = allxy.min(axis=0), allxy.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    scale = (SVG_WIDTH - 2 * SVG_MARGIN) / max(span)
    height = span[1] * scale + 2 * SVG_MARGIN

    def to_px(a: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(a)
        return np.column_stack([SVG_MARGIN + (a[:, 0] - lo[0]) * scale, height - SVG_MARGIN - (a[:, 1] - lo[1]) * scale])

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {SVG_WIDTH:.0f} {height:.0f}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for key in sorted(curves):
        c = curves[key]
        kind, side = key
        pts = _thin(to_px(c.xy))
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        dash = ' stroke-dasharray="6 4"' if kind == STABLE else ""
        out.append(f'<polyline class="curve {kind}" data-branch="{kind}{"+" if side > 0 else "-"}" fill="none" '
                   f'stroke="{COLORS.get(key, "black")}" stroke-width="1"{dash} points="{coords}"/>')
    for p, prim in zip(points, flags):
        (cx, cy), = to_px(np.asarray(p.position, float))
        label = pair_label(p.branch_pair)
        if prim:
            out.append(f'<circle class="marker primary" data-pair="{label}" cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="black"/>')
        else:
            out.append(f'<circle class="marker secondary" data-pair="{label}" cx="{cx:.2f}" cy="{cy:.2f}" r="2.5" '
                       f'fill="none" stroke="gray" stroke-width="1"/>')
    (fx, fy), = to_px(np.asarray(fixed_point, float))
    out.append(f'<rect class="fixed-point" x="{fx - 4:.2f}" y="{fy - 4:.2f}" width="8" height="8" fill="none" stroke="black"/>')
    out.append(f'<text class="fixed-point-label" x="{fx + 6:.2f}" y="{fy - 6:.2f}" font-size="12" font-family="sans-serif">x</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
    return len(points)


def curves_to_csv(curves: dict[tuple[str, int], BranchCurve], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "side", "index", "x", "y", "param"])
        for key in sorted(curves):
            c = curves[key]
            side = "+" if c.side > 0 else "-"
            for i, ((x, y), s) in enumerate(zip(c.xy, c.param)):
                w.writerow([c.kind, side, i, f"{x:.17g}", f"{y:.17g}", f"{s:.17g}"])


def emit_reports(res, out_dir) -> dict[str, Path]:
    """Write every artifact of a finished run; returns name -> path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {name: out / name for name in ("points.csv", "classes.csv", "complex.json", "homology.json", "report.json", "tangle.svg")}
    pts = res.all_points
    points_to_csv(pts, files["points.csv"])
    classes_to_csv(res.classes, files["classes.csv"])
    serialize.dump(res.complex.to_json(), files["complex.json"])
    serialize.dump(homology_json(res.complex.ranks, res.homology, res.morse), files["homology.json"])
    serialize.dump(res.report.to_json(), files["report.json"])
    flags = [bool(res.tangles[pair].primary[i]) for pair in sorted(res.tangles, reverse=True) for i in range(len(res.tangles[pair].points))]
    ordered = [p for pair in sorted(res.tangles, reverse=True) for p in res.tangles[pair].points]
    emit_svg_tangle(res.curves, ordered, files["tangle.svg"], flags, res.fixed_point.location)
    if res.config.dump_curves:
        files["curves.csv"] = out / "curves.csv"
        curves_to_csv(res.curves, files["curves.csv"])
    return files


def emit_partial(res, out_dir) -> dict[str, Path]:
    """Artifacts available after step 3 (used by ``validate``)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"points.csv": out / "points.csv", "tangle.svg": out / "tangle.svg"}
    points_to_csv(res.all_points, files["points.csv"])
    flags, ordered = [], []
    for pair in sorted(res.points, reverse=True):
        t = res.tangles.get(pair)
        for i, p in enumerate(res.points[pair]):
            ordered.append(p)
            flags.append(bool(t.primary[i]) if t is not None else False)
    emit_svg_tangle(res.curves, ordered, files["tangle.svg"], flags, res.fixed_point.location)
    if res.classes:
        files["classes.csv"] = out / "classes.csv"
        classes_to_csv(res.classes, files["classes.csv"])
    return files
