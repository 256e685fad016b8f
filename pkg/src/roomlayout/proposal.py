"""Candidate layout generation from feature maps.

Wall-wall boundary candidates come from two sources: ridges of the ww
boundary channel, and wwf/wwc corner pairs that agree with the vertical
vanishing point.  Layouts are then assembled from subsets of those lines, with
floor and ceiling corners read off the segmentation map, for every surface
configuration and every wall count up to the complexity cap.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .errors import BudgetExceeded
from .featuremaps import FeatureMaps
from .geometry import (
    LineSegment,
    Point,
    angle_to,
    bilinear,
    deviation_from_vertical,
    fit_segment,
    intersect,
    least_squares_point,
    orientation_diff,
)
from .layout import CEILING, FLOOR, Layout, WWBoundary, single_wall, validate

CONFIGURATIONS = ((True, True), (False, True), (True, False), (False, False))  # (ceiling, floor)

INITIALIZED = "initialized"
ALIGNED_INTERMEDIATE = "aligned-intermediate"
ALIGNED_FINAL = "aligned-final"


@dataclass(frozen=True)
class ProposalConfig:
    tau_b: float = 0.5
    tau_c: float = 0.3
    r_nms: float = 8.0
    theta_vp_deg: float = 5.0
    eps_edge_frac: float = 0.02
    min_component_len: float = 12.0
    max_candidates: int = 2000
    near_vertical_deg: float = 30.0
    dedupe_px: float = 3.0
    dedupe_deg: float = 2.0
    ransac_iters: int = 500
    ransac_seed: int = 0
    prune_conf: float = 0.25
    enumeration_factor: int = 20

    def __post_init__(self):
        if not 0 < self.tau_b < 1 or not 0 < self.tau_c < 1:
            raise ValueError("tau_b and tau_c must lie in (0, 1)")
        if self.r_nms < 0 or self.min_component_len < 0:
            raise ValueError("r_nms and min_component_len must be non-negative")
        if not 0 < self.theta_vp_deg < 90:
            raise ValueError("theta_vp_deg must lie in (0, 90)")
        if not 0 <= self.eps_edge_frac < 0.5:
            raise ValueError("eps_edge_frac must lie in [0, 0.5)")
        if self.max_candidates < 4:
            raise ValueError("max_candidates must be >= 4")

    @property
    def theta_vp(self) -> float:
        return math.radians(self.theta_vp_deg)


@dataclass(frozen=True)
class VanishingPoint:
    location: Optional[Point]
    support: int
    valid: bool


@dataclass
class CandidateSet:
    image_id: str
    layouts: List[Layout] = field(default_factory=list)
    provenance: List[str] = field(default_factory=list)
    cue_source: str = ""

    def __len__(self):
        return len(self.layouts)

    def add(self, layout: Layout, tag: str) -> None:
        self.layouts.append(layout)
        self.provenance.append(tag)

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "cue_source": self.cue_source,
            "candidates": [{"provenance": p, "layout": l.to_dict()} for l, p in zip(self.layouts, self.provenance)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateSet":
        cs = cls(d["image_id"], cue_source=d.get("cue_source", ""))
        for c in d["candidates"]:
            cs.add(Layout.from_dict(c["layout"]), c["provenance"])
        return cs


# -- ww boundaries from the boundary map ------------------------------------

def _boundary_plane(maps) -> np.ndarray:
    if isinstance(maps, FeatureMaps):
        return maps.boundary[0]
    arr = np.asarray(maps)
    return arr[0] if arr.ndim == 3 else arr


def detect_ww_from_boundary(maps, cfg: ProposalConfig = ProposalConfig()) -> List[LineSegment]:
    """Threshold, close, open, split into components, fit one line per component."""
    plane = _boundary_plane(maps)
    mask = plane >= cfg.tau_b
    st = np.ones((3, 3), bool)
    mask = ndimage.binary_closing(mask, st)
    mask = ndimage.binary_opening(mask, st)
    lab, n = ndimage.label(mask, structure=st)
    segs = []
    for i, sl in enumerate(ndimage.find_objects(lab), start=1):
        rr, cc = np.nonzero(lab[sl] == i)
        if len(rr) < 2:
            continue
        pts = np.stack([cc + sl[1].start + 0.5, rr + sl[0].start + 0.5], axis=1)
        seg = fit_segment(pts)
        if seg.length >= cfg.min_component_len:
            segs.append(seg)
    return sorted(segs, key=lambda s: (s.midpoint.x, s.midpoint.y))


# -- corners -------------------------------------------------------------------

def _local_maxima(plane: np.ndarray, tau: float, r_nms: float) -> List[Point]:
    h, w = plane.shape
    mx = ndimage.maximum_filter(plane, size=5, mode="constant", cval=-np.inf)
    mn = ndimage.minimum_filter(plane, size=3, mode="nearest")
    cand = (plane == mx) & (plane >= tau) & (mn < plane)
    found = []
    for r, c in zip(*np.nonzero(cand)):
        win = plane[max(r - 2, 0):r + 3, max(c - 2, 0):c + 3]
        ties = np.argwhere(win == plane[r, c])
        if len(ties) > 1:
            # small symmetric plateaus keep their first pixel in raster order
            if len(ties) > 4:
                continue
            first = ties[0] + [max(r - 2, 0), max(c - 2, 0)]
            if (first[0], first[1]) != (r, c):
                continue
        v = float(plane[r, c])
        dx = dy = 0.0
        if 0 < c < w - 1:
            l, rt = plane[r, c - 1], plane[r, c + 1]
            den = l - 2 * v + rt
            if den < 0:
                dx = float(np.clip(0.5 * (l - rt) / den, -0.5, 0.5))
        if 0 < r < h - 1:
            u, d = plane[r - 1, c], plane[r + 1, c]
            den = u - 2 * v + d
            if den < 0:
                dy = float(np.clip(0.5 * (u - d) / den, -0.5, 0.5))
        found.append((v, Point(c + 0.5 + dx, r + 0.5 + dy)))
    found.sort(key=lambda t: (-t[0], t[1].y, t[1].x))
    kept: List[Tuple[float, Point]] = []
    for v, p in found:
        if all(math.hypot(p.x - q.x, p.y - q.y) > r_nms for _, q in kept):
            kept.append((v, p))
    return [p for _, p in kept]


def detect_corners(maps, cfg: ProposalConfig = ProposalConfig()) -> Tuple[List[Point], List[Point]]:
    """Strict 5x5 local maxima above ``tau_c`` per corner channel, then NMS."""
    corner = maps.corner if isinstance(maps, FeatureMaps) else np.asarray(maps)
    wwf = _local_maxima(corner[0], cfg.tau_c, cfg.r_nms)
    wwc = _local_maxima(corner[1], cfg.tau_c, cfg.r_nms)
    return wwf, wwc


# -- vertical vanishing point --------------------------------------------------

def estimate_vertical_vp(segments: Sequence[LineSegment], cfg: ProposalConfig = ProposalConfig()) -> VanishingPoint:
    """RANSAC over pairs of near-vertical segments, least-squares refit on inliers."""
    near = [s for s in segments if deviation_from_vertical(s) <= math.radians(cfg.near_vertical_deg)]
    if len(near) < 2:
        return VanishingPoint(None, len(near), False)
    pairs = list(itertools.combinations(range(len(near)), 2))
    if len(pairs) > cfg.ransac_iters:
        rng = np.random.default_rng(cfg.ransac_seed)
        pick = rng.choice(len(pairs), size=cfg.ransac_iters, replace=False)
        pairs = [pairs[i] for i in sorted(pick)]
    best = None
    for i, j in pairs:
        p = intersect(near[i], near[j])
        if p is None:
            continue
        angles = np.array([angle_to(s, p) for s in near])
        inl = angles <= cfg.theta_vp
        key = (int(inl.sum()), -float(angles[inl].sum()))
        if best is None or key > best[0]:
            best = (key, p, inl)
    if best is None:
        # all candidates parallel: vanishing point at infinity
        return VanishingPoint(None, len(near), False)
    (support, _), p, inl = best
    inliers = [s for s, ok in zip(near, inl) if ok]
    refined = least_squares_point(inliers) if len(inliers) >= 2 else None
    if refined is not None and all(angle_to(s, refined) <= cfg.theta_vp for s in inliers):
        p = refined
    return VanishingPoint(p, support, support >= 2)


# -- corner pairing ------------------------------------------------------------

def satisfies_vp(seg: LineSegment, vp: VanishingPoint, theta: float) -> bool:
    if vp.valid and vp.location is not None:
        return angle_to(seg, vp.location) <= theta
    return deviation_from_vertical(seg) <= theta


def is_duplicate(s: LineSegment, t: LineSegment, px: float, deg: float) -> bool:
    if orientation_diff(s, t) >= math.radians(deg):
        return False
    d = max(t.line_distance(s.midpoint), s.line_distance(t.midpoint))
    return d < px


def dedupe(segments: Sequence[LineSegment], px: float, deg: float) -> List[LineSegment]:
    out: List[LineSegment] = []
    for s in segments:
        if not any(is_duplicate(s, t, px, deg) for t in out):
            out.append(s)
    return out


def pair_corners(
    wwf: Sequence[Point], wwc: Sequence[Point], vp: VanishingPoint, cfg: ProposalConfig = ProposalConfig()
) -> List[LineSegment]:
    """Keep the wwc -> wwf connections that point at the vertical vanishing point."""
    out = []
    for f in wwf:
        for c in wwc:
            if not c.y < f.y:
                continue
            seg = LineSegment(c, f)
            if satisfies_vp(seg, vp, cfg.theta_vp):
                out.append(seg)
    return dedupe(out, cfg.dedupe_px, cfg.dedupe_deg)


def ww_candidates(maps: FeatureMaps, cfg: ProposalConfig = ProposalConfig()) -> Tuple[List[LineSegment], VanishingPoint]:
    """Union of boundary-map lines and vanishing-point-consistent corner pairs."""
    from_map = detect_ww_from_boundary(maps, cfg)
    vp = estimate_vertical_vp(from_map, cfg)
    wwf, wwc = detect_corners(maps, cfg)
    from_corners = pair_corners(wwf, wwc, vp, cfg)
    lim = math.radians(cfg.near_vertical_deg)
    merged = dedupe([s for s in from_map + from_corners if deviation_from_vertical(s) <= lim],
                    cfg.dedupe_px, cfg.dedupe_deg)
    return merged, vp


# -- layout initialization ---------------------------------------------------

@dataclass(frozen=True)
class _Line:
    """A near-vertical line x = x0 + slope * y, with its crossing corners."""

    x0: float
    slope: float
    confidence: float
    ceil: Point  # ceiling-region crossing (or top junction)
    floor: Point  # floor-region crossing (or bottom junction)
    top: Point
    bottom: Point
    edge: Optional[str] = None

    def x_at(self, y: float) -> float:
        return self.x0 + self.slope * y


def _snap(p: Point, line: "_Line", w: int, h: int, eps: float) -> Point:
    """Move a crossing that hugs an image side onto the line/side junction."""
    if p.y <= eps:
        return line.top
    if p.y >= h - eps:
        return line.bottom
    if line.edge is None:
        for side_x in (0.0, float(w)):
            if abs(p.x - side_x) <= eps and abs(line.slope) > 1e-9:
                y = (side_x - line.x0) / line.slope
                if 0 <= y <= h:
                    return Point(side_x, y)
    return p


def _crossings(labels: np.ndarray, x0: float, slope: float, step: float = 0.25):
    """Walk the line top-down; return (ceiling_y, floor_y) where the ceiling
    region ends and the floor region begins, None when absent."""
    h, w = labels.shape
    ys = np.arange(step / 2, h, step)
    xs = x0 + slope * ys
    ok = (xs >= 0) & (xs < w)
    if not ok.any():
        return None, None
    ys, xs = ys[ok], xs[ok]
    lab = labels[ys.astype(int), np.minimum(xs.astype(int), w - 1)]
    ceil_y = floor_y = None
    if lab[0] == CEILING and (lab != CEILING).any():
        run = int(np.argmax(lab != CEILING))
        ceil_y = 0.5 * (ys[run - 1] + ys[run])
    if lab[-1] == FLOOR and (lab != FLOOR).any():
        first = len(lab) - int(np.argmax(lab[::-1] != FLOOR))
        floor_y = 0.5 * (ys[first - 1] + ys[first])
    return ceil_y, floor_y


def _make_line(labels, x0, slope, confidence, cfg, edge=None) -> _Line:
    h, w = labels.shape
    eps = cfg.eps_edge_frac * min(w, h)
    top = Point(x0, 0.0)
    bottom = Point(x0 + slope * h, float(h))
    lx0 = x0 if edge is None else (0.0 if edge == "left" else float(w) - 1e-9)
    cy, fy = _crossings(labels, lx0, slope)
    line = _Line(x0, slope, confidence, top, bottom, top, bottom, edge)
    ceil = top if cy is None else Point(x0 + slope * cy, cy)
    floor = bottom if fy is None else Point(x0 + slope * fy, fy)
    return _Line(x0, slope, confidence, _snap(ceil, line, w, h, eps), _snap(floor, line, w, h, eps), top, bottom, edge)


def _line_confidence(seg: LineSegment, plane: np.ndarray) -> float:
    n = max(int(seg.length), 2)
    t = (np.arange(n) + 0.5) / n
    pts = np.stack([seg.a.x + t * (seg.b.x - seg.a.x), seg.a.y + t * (seg.b.y - seg.a.y)], axis=1)
    return float(bilinear(plane, pts).mean())


def _clip_point(p: Point, w: int, h: int) -> Point:
    return Point(min(max(p.x, 0.0), float(w)), min(max(p.y, 0.0), float(h)))


def _assemble(lines: Sequence[_Line], edges: Tuple[_Line, _Line], has_c: bool, has_f: bool, w: int, h: int) -> Layout:
    chosen = list(lines)
    if has_c or has_f:
        chosen = [edges[0]] + chosen + [edges[1]]
    bs = []
    for ln in chosen:
        f = _clip_point(ln.floor if has_f else ln.bottom, w, h)
        c = _clip_point(ln.ceil if has_c else ln.top, w, h)
        if ln.edge is not None:
            x = 0.0 if ln.edge == "left" else float(w)
            f, c = Point(x, f.y), Point(x, c.y)
        f_vis = has_f and ln.floor is not ln.bottom and 0 < f.y < h
        c_vis = has_c and ln.ceil is not ln.top and 0 < c.y < h
        bs.append(WWBoundary(f, c, bool(f_vis and ln.edge is None), bool(c_vis and ln.edge is None)))
    return Layout(tuple(bs), has_c, has_f, w, h)


def _n_subsets(n: int, cap: int) -> int:
    return sum(math.comb(n, k) for k in range(0, min(cap - 1, n) + 1))


def initialize_layouts(
    ww: Sequence[LineSegment],
    maps: FeatureMaps,
    cap: int,
    cfg: ProposalConfig = ProposalConfig(),
    image_id: str = "",
) -> CandidateSet:
    """Enumerate layouts with at most ``cap`` walls from ww line subsets.

    Subsets are ranked by the mean boundary confidence of their lines and the
    best ones are kept until ``cfg.max_candidates`` layouts have been emitted.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    labels = maps.seg_labels()
    h, w = labels.shape
    plane = maps.boundary[0]

    lines = []
    for seg in ww:
        dy = seg.b.y - seg.a.y
        if abs(dy) < 1e-9:
            continue
        slope = (seg.b.x - seg.a.x) / dy
        x0 = seg.a.x - slope * seg.a.y
        lines.append(_make_line(labels, x0, slope, _line_confidence(seg, plane), cfg))
    # order left-to-right at mid-height
    lines.sort(key=lambda ln: (ln.x_at(h / 2), ln.slope))
    edges = (_make_line(labels, 0.0, 0.0, 1.0, cfg, "left"), _make_line(labels, float(w), 0.0, 1.0, cfg, "right"))

    limit = cfg.enumeration_factor * cfg.max_candidates
    if _n_subsets(len(lines), cap) > limit:
        lines = [ln for ln in lines if ln.confidence >= cfg.prune_conf]
        if _n_subsets(len(lines), cap) > limit:
            raise BudgetExceeded(
                f"{image_id or 'image'}: {len(lines)} ww candidates with cap {cap} exceed the enumeration budget"
            )

    subsets = []
    for k in range(0, min(cap - 1, len(lines)) + 1):
        for idx in itertools.combinations(range(len(lines)), k):
            score = float(np.mean([lines[i].confidence for i in idx])) if idx else 1.0
            subsets.append((score, idx))
    subsets.sort(key=lambda t: (-t[0], len(t[1]), t[1]))

    scored: List[Tuple[float, Layout]] = []
    seen = set()
    for score, idx in subsets:
        if len(scored) >= cfg.max_candidates:
            break
        chosen = [lines[i] for i in idx]
        for has_c, has_f in CONFIGURATIONS:
            if not chosen and not (has_c or has_f):
                layout = single_wall(w, h)
            else:
                layout = _assemble(chosen, edges, has_c, has_f, w, h)
            if validate(layout) or layout in seen:
                continue
            seen.add(layout)
            scored.append((score, layout))
            if len(scored) >= cfg.max_candidates:
                break
    scored.sort(key=lambda t: (-t[0], t[1].key()))
    out = CandidateSet(image_id)
    for _, layout in scored:
        out.add(layout, INITIALIZED)
    return out


def propose(maps: FeatureMaps, cap: Optional[int] = None, cfg: ProposalConfig = ProposalConfig(), image_id: str = "") -> CandidateSet:
    """Detect ww candidates and initialize layouts under the complexity cap."""
    from .featuremaps import predict_wall_count

    if cap is None:
        cap = predict_wall_count(maps.complexity)
    ww, _ = ww_candidates(maps, cfg)
    return initialize_layouts(ww, maps, cap, cfg, image_id)
