"""Layout error metrics and the ranking / complexity experiments built on them."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionMismatch, EmptyInput
from .featuremaps import visible_corners
from .geometry import LineSegment, Point, point_segment_distance
from .layout import Layout, boundary_segments, label_map


def _same_dims(a: Layout, b: Layout) -> None:
    if (a.image_width, a.image_height) != (b.image_width, b.image_height):
        raise DimensionMismatch(
            f"layouts differ in size: {a.image_width}x{a.image_height} vs {b.image_width}x{b.image_height}"
        )


def e_pixel(layout: Layout, gt: Layout) -> float:
    """Fraction of pixels whose surface label differs."""
    _same_dims(layout, gt)
    return float(np.count_nonzero(label_map(layout) != label_map(gt)) / (gt.image_width * gt.image_height))


def _frame(layout: Layout) -> List[LineSegment]:
    w, h = float(layout.image_width), float(layout.image_height)
    c = [Point(0.0, 0.0), Point(w, 0.0), Point(w, h), Point(0.0, h)]
    return [LineSegment(c[i], c[(i + 1) % 4]) for i in range(4)]


def _all_segments(layout: Layout) -> List[LineSegment]:
    return [s for segs in boundary_segments(layout).values() for s in segs]


def corner_contributions(layout: Layout, gt: Layout) -> np.ndarray:
    """Per-joint distances (pixels) that make up :func:`e_corner`."""
    _same_dims(layout, gt)
    out: List[float] = []
    segs_l = _all_segments(layout) or _frame(layout)
    segs_g = _all_segments(gt) or _frame(gt)
    for pl, pg in zip(visible_corners(layout), visible_corners(gt)):
        a = np.array(pl, dtype=float).reshape(-1, 2)
        b = np.array(pg, dtype=float).reshape(-1, 2)
        if len(a) and len(b):
            cost = np.linalg.norm(a[:, None] - b[None], axis=2)
            ri, ci = linear_sum_assignment(cost)
            out.extend(cost[ri, ci].tolist())
            a_left = np.setdiff1d(np.arange(len(a)), ri)
            b_left = np.setdiff1d(np.arange(len(b)), ci)
        else:
            a_left, b_left = np.arange(len(a)), np.arange(len(b))
        # an unmatched joint is charged its distance to the other layout's boundaries
        if len(a_left):
            out.extend(point_segment_distance(a[a_left], segs_g).tolist())
        if len(b_left):
            out.extend(point_segment_distance(b[b_left], segs_l).tolist())
    return np.array(out)


def e_corner(layout: Layout, gt: Layout) -> float:
    """Mean joint displacement normalized by the image diagonal."""
    c = corner_contributions(layout, gt)
    return float(c.mean() / gt.diagonal) if c.size else 0.0


def topk_table(ranked_errors: Sequence[Sequence[float]], ks: Sequence[int] = (1, 5, 10, 20), stat: str = "mean") -> Dict[int, float]:
    """For each k, the mean over images of the top-k statistic.

    ``ranked_errors[i]`` lists image i's candidate e_pixel values ordered by
    score, best first.  ``stat`` is ``"mean"`` (average over the top k) or
    ``"min"`` (best within the top k); pools shorter than k use all entries.
    """
    if stat not in ("mean", "min"):
        raise ValueError(f"unknown top-k statistic {stat!r}")
    if len(ranked_errors) == 0:
        raise EmptyInput("no images to tabulate")
    pools = [np.asarray(e, dtype=float) for e in ranked_errors]
    if any(p.size == 0 for p in pools):
        raise EmptyInput("an image has no ranked candidates")
    fn = np.mean if stat == "mean" else np.min
    table = {}
    for k in ks:
        if k < 1:
            raise ValueError("k must be >= 1")
        table[int(k)] = float(np.mean([fn(p[:k]) for p in pools]))
    return table


@dataclass
class ImageResult:
    image_id: str
    e_pixel: float
    e_corner: float
    rank_of_gt: int  # 1-based rank of the ground-truth-nearest candidate, 0 if unknown


@dataclass
class MetricReport:
    images: List[ImageResult] = field(default_factory=list)
    top_k: Dict[int, float] = field(default_factory=dict)

    @property
    def e_pixel(self) -> float:
        return float(np.mean([r.e_pixel for r in self.images])) if self.images else math.nan

    @property
    def e_corner(self) -> float:
        return float(np.mean([r.e_corner for r in self.images])) if self.images else math.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["image_id", "e_pixel", "e_corner", "rank_of_gt"])
        for r in self.images:
            wr.writerow([r.image_id, f"{r.e_pixel:.6f}", f"{r.e_corner:.6f}", r.rank_of_gt])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            f"images      {len(self.images)}",
            f"e_pixel     {100 * self.e_pixel:6.2f} %",
            f"e_corner    {100 * self.e_corner:6.2f} %",
        ]
        ranks = [r.rank_of_gt for r in self.images if r.rank_of_gt > 0]
        if ranks:
            lines.append(f"gt-nearest top-1  {100 * np.mean(np.array(ranks) == 1):6.2f} %")
        if self.top_k:
            lines.append("top-k mean e_pixel")
            lines += [f"  top {k:<3d}  {100 * v:6.2f} %" for k, v in sorted(self.top_k.items())]
        return "\n".join(lines) + "\n"


def nearest_rank(errors: Sequence[float], order: Sequence[int]) -> int:
    """1-based rank of the first candidate reaching the pool's minimum error."""
    e = np.asarray(errors, dtype=float)
    best = e.min()
    for r, i in enumerate(order, 1):
        if e[i] <= best + 1e-12:
            return r
    return 0


def complexity_sweep(dataset, caps: Sequence[int], params, cfg=None) -> Dict[int, Tuple[float, float]]:
    """Mean (e_pixel, e_corner) of the full pipeline with the wall count capped.

    ``dataset`` is a sequence of ``(maps, gt)`` or ``(maps, gt, photo)``.
    """
    from .pipeline import PipelineConfig, infer

    if not caps:
        return {}
    if len(dataset) == 0:
        raise EmptyInput("empty dataset")
    cfg = cfg or PipelineConfig()
    out = {}
    for cap in caps:
        ep, ec = [], []
        for item in dataset:
            maps, gt = item[0], item[1]
            photo = item[2] if len(item) > 2 else None
            res = infer(maps, params, cfg.with_cap(cap), photo=photo)
            ep.append(e_pixel(res.layout, gt))
            ec.append(e_corner(res.layout, gt))
        out[int(cap)] = (float(np.mean(ep)), float(np.mean(ec)))
    return out
