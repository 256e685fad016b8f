"""Snap candidate layouts onto straight edges seen in the image.

Line cues are extracted with a small edge pipeline (smoothed Sobel gradients,
non-maximum thinning with sub-pixel offsets, orientation-consistent linking,
line fitting).  Each layout boundary is then moved onto its best nearby cue
and the affected corners are re-intersected.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .geometry import (
    LineSegment,
    Point,
    fit_segment,
    intersect,
    least_squares_point,
    orientation_diff,
)
from .layout import EDGE_TOL, Layout, WWBoundary, validate


@dataclass(frozen=True)
class RefineConfig:
    theta_align_deg: float = 10.0
    d_align: float = 15.0
    min_cue_len: float = 20.0
    grad_sigma: float = 1.0
    grad_thresh: float = 0.02
    link_tol_deg: float = 22.5
    min_move_px: float = 0.05

    def __post_init__(self):
        if not 0 < self.theta_align_deg < 90:
            raise ValueError("theta_align_deg must lie in (0, 90)")
        if self.d_align <= 0 or self.min_cue_len <= 0:
            raise ValueError("d_align and min_cue_len must be positive")

    @property
    def theta_align(self) -> float:
        return math.radians(self.theta_align_deg)


@dataclass
class CueSet:
    segments: List[LineSegment] = field(default_factory=list)
    source: str = ""


# -- cue extraction ----------------------------------------------------------

# neighbour offsets (drow, dcol) along each quantized gradient direction
_DIRS = ((0, 1), (1, 1), (1, 0), (1, -1))
SETTLE_ROUNDS = 20


def _edge_points(img: np.ndarray, cfg: RefineConfig):
    sm = ndimage.gaussian_filter(img.astype(np.float64), cfg.grad_sigma) if cfg.grad_sigma > 0 else img.astype(float)
    gx = ndimage.sobel(sm, axis=1) / 8.0
    gy = ndimage.sobel(sm, axis=0) / 8.0
    mag = np.hypot(gx, gy)
    h, w = mag.shape
    theta = np.arctan2(gy, gx)
    q = np.round(((theta + np.pi) % np.pi) / (np.pi / 4)).astype(int) % 4
    pad = np.pad(mag, 1)
    keep = np.zeros_like(mag, dtype=bool)
    offs = np.zeros((h, w, 2))
    rr, cc = np.mgrid[0:h, 0:w]
    for k, (dr, dc) in enumerate(_DIRS):
        sel = q == k
        fwd = pad[rr + 1 + dr, cc + 1 + dc]
        bwd = pad[rr + 1 - dr, cc + 1 - dc]
        # ">=" on one side, ">" on the other: a flat two-pixel crest keeps one pixel
        ok = sel & (mag >= fwd) & (mag > bwd) & (mag >= cfg.grad_thresh)
        keep |= ok
        den = bwd - 2 * mag + fwd
        t = np.where(den < 0, 0.5 * (bwd - fwd) / np.where(den < 0, den, -1), 0.0)
        t = np.clip(t, -0.5, 0.5)
        offs[ok, 0] = (t * dc)[ok]
        offs[ok, 1] = (t * dr)[ok]
    pts = np.stack([cc + 0.5 + offs[..., 0], rr + 0.5 + offs[..., 1]], axis=-1)
    # edge direction is perpendicular to the gradient, undirected
    edge_angle = (theta + np.pi / 2) % np.pi
    return keep, pts, edge_angle, mag


def _angle_gap(a: float, b: float) -> float:
    d = abs(a - b) % np.pi
    return min(d, np.pi - d)


def extract_cues(image: np.ndarray, cfg: RefineConfig = RefineConfig(), source: str = "") -> CueSet:
    """Straight line segments visible in a grayscale raster."""
    img = np.asarray(image, dtype=np.float64)
    if img.size == 0:
        raise ValueError("empty image")
    if img.ndim == 3:
        img = img.mean(axis=2)
    keep, pts, ang, mag = _edge_points(img, cfg)
    h, w = keep.shape
    used = np.zeros_like(keep)
    tol = math.radians(cfg.link_tol_deg)
    order = np.argsort(-mag[keep], kind="stable")
    seeds = np.argwhere(keep)[order]
    segs = []
    for r0, c0 in seeds:
        if used[r0, c0]:
            continue
        region = [(r0, c0)]
        used[r0, c0] = True
        # running mean orientation on the doubled-angle circle
        sx, sy = math.cos(2 * ang[r0, c0]), math.sin(2 * ang[r0, c0])
        queue = deque(region)
        while queue:
            r, c = queue.popleft()
            mean = 0.5 * math.atan2(sy, sx)
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rn, cn = r + dr, c + dc
                    if (dr or dc) and 0 <= rn < h and 0 <= cn < w and keep[rn, cn] and not used[rn, cn]:
                        if _angle_gap(ang[rn, cn], mean) <= tol:
                            used[rn, cn] = True
                            region.append((rn, cn))
                            queue.append((rn, cn))
                            sx += math.cos(2 * ang[rn, cn])
                            sy += math.sin(2 * ang[rn, cn])
        if len(region) < 2:
            continue
        rs, cs = np.array(region).T
        seg = fit_segment(pts[rs, cs])
        if seg.length >= cfg.min_cue_len:
            segs.append(seg)
    segs.sort(key=lambda s: (s.midpoint.x, s.midpoint.y))
    return CueSet(segs, source)


def cues_from_maps(maps, cfg: RefineConfig = RefineConfig()) -> CueSet:
    """Fallback cues from the boundary map when no photograph is available."""
    return extract_cues(maps.boundary[:3].max(axis=0), cfg, source="boundary-map")


# -- alignment ---------------------------------------------------------------

@dataclass(frozen=True)
class _Bnd:
    kind: str  # "ww", "wf", "wc"
    index: int  # ww: boundary index; wf/wc: index of the left corner
    seg: LineSegment


def _alignable(layout: Layout) -> List[_Bnd]:
    out = []
    bs = layout.boundaries
    for i, b in enumerate(bs):
        if layout.edge_side(b) is None and b.floor_corner != b.ceil_corner:
            out.append(_Bnd("ww", i, LineSegment(b.ceil_corner, b.floor_corner)))
    h = layout.image_height
    for kind, flag, get in (("wf", layout.has_floor, lambda b: b.floor_corner), ("wc", layout.has_ceiling, lambda b: b.ceil_corner)):
        if not flag:
            continue
        for i in range(len(bs) - 1):
            p, q = get(bs[i]), get(bs[i + 1])
            if math.hypot(p.x - q.x, p.y - q.y) <= 1e-6:
                continue
            on_frame = abs(p.y - q.y) <= EDGE_TOL and (abs(p.y) <= EDGE_TOL or abs(p.y - h) <= EDGE_TOL)
            if not on_frame:
                out.append(_Bnd(kind, i, LineSegment(p, q)))
    return out


def _best_cue(seg: LineSegment, cues: Sequence[LineSegment], cfg: RefineConfig) -> Optional[LineSegment]:
    best = None
    m = seg.midpoint
    d = seg.direction
    t_lo, t_hi = 0.0, seg.length
    for cue in cues:
        if orientation_diff(seg, cue) > cfg.theta_align:
            continue
        dist = cue.line_distance(m)
        if dist > cfg.d_align:
            continue
        # the cue must overlap the boundary along its direction
        ta = (cue.a.x - seg.a.x) * d[0] + (cue.a.y - seg.a.y) * d[1]
        tb = (cue.b.x - seg.a.x) * d[0] + (cue.b.y - seg.a.y) * d[1]
        if max(ta, tb) < t_lo or min(ta, tb) > t_hi:
            continue
        key = (dist, -cue.length)
        if best is None or key < best[0]:
            best = (key, cue)
    return None if best is None else best[1]


def _frame_lines(p: Point, w: int, h: int) -> List[LineSegment]:
    out = []
    if abs(p.x) <= EDGE_TOL:
        out.append(LineSegment(Point(0, 0), Point(0, h)))
    if abs(p.x - w) <= EDGE_TOL:
        out.append(LineSegment(Point(w, 0), Point(w, h)))
    if abs(p.y) <= EDGE_TOL:
        out.append(LineSegment(Point(0, 0), Point(w, 0)))
    if abs(p.y - h) <= EDGE_TOL:
        out.append(LineSegment(Point(0, h), Point(w, h)))
    return out


def _move_corner(p: Point, trusted: List[LineSegment], loose: List[LineSegment]) -> Point:
    if len(trusted) >= 2:
        q = least_squares_point(trusted)
        if q is not None:
            return q
    if len(trusted) >= 1:
        t = trusted[0]
        best = None
        for other in loose:
            q = intersect(t, other)
            if q is not None:
                d = math.hypot(q.x - p.x, q.y - p.y)
                if best is None or d < best[0]:
                    best = (d, q)
        if best is not None:
            return best[1]
        # no transversal partner: project onto the trusted line
        n = t.normal
        off = n[0] * (p.x - t.a.x) + n[1] * (p.y - t.a.y)
        return Point(p.x - off * n[0], p.y - off * n[1])
    return p


def _apply(layout: Layout, bnds: List[_Bnd], moved: Dict[Tuple[str, int], LineSegment]) -> Optional[Layout]:
    w, h = layout.image_width, layout.image_height
    lines = {(b.kind, b.index): moved.get((b.kind, b.index), b.seg) for b in bnds}
    trusted_keys = set(moved)
    new = []
    for i, b in enumerate(layout.boundaries):
        corners = []
        for corner, kind in ((b.floor_corner, "wf"), (b.ceil_corner, "wc")):
            incident = [("ww", i), (kind, i - 1), (kind, i)]
            trusted = [lines[k] for k in incident if k in lines and k in trusted_keys]
            loose = [lines[k] for k in incident if k in lines and k not in trusted_keys]
            trusted += _frame_lines(corner, w, h)
            if not any(k in trusted_keys for k in incident):
                corners.append(corner)
                continue
            q = _move_corner(corner, trusted, loose)
            if not (-0.5 <= q.x <= w + 0.5 and -0.5 <= q.y <= h + 0.5):
                return None
            q = Point(min(max(q.x, 0.0), float(w)), min(max(q.y, 0.0), float(h)))
            corners.append(q)
        new.append(WWBoundary(corners[0], corners[1], b.floor_visible, b.ceil_visible))
    out = Layout(tuple(new), layout.has_ceiling, layout.has_floor, w, h)
    if validate(out):
        return None
    # edge boundaries must stay on their sides
    for b_old, b_new in zip(layout.boundaries, out.boundaries):
        if layout.edge_side(b_old) != out.edge_side(b_new):
            return None
    return out


def _max_move(a: Layout, b: Layout) -> float:
    m = 0.0
    for p, q in zip(a.boundaries, b.boundaries):
        m = max(m, math.dist(p.floor_corner, q.floor_corner), math.dist(p.ceil_corner, q.ceil_corner))
    return m


def _matches(layout: Layout, cues: CueSet, cfg: RefineConfig):
    bnds = _alignable(layout)
    matches: Dict[Tuple[str, int], LineSegment] = {}
    for b in bnds:
        cue = _best_cue(b.seg, cues.segments, cfg)
        if cue is not None:
            matches[(b.kind, b.index)] = cue
    return bnds, matches


def _settle(layout: Layout, cand: Layout, cues: CueSet, cfg: RefineConfig) -> Layout:
    # snapping moves corners, which can change which cues the neighbouring
    # boundaries match; repeat the full snap until it no longer moves anything
    for _ in range(SETTLE_ROUNDS):
        bnds, matches = _matches(cand, cues, cfg)
        nxt = _apply(cand, bnds, matches) if matches else None
        if nxt is None or _max_move(layout, nxt) > 2 * cfg.d_align:
            break
        step = _max_move(cand, nxt)
        cand = nxt
        if step < 0.5 * cfg.min_move_px:
            break
    return cand


def _align(layout: Layout, cues: CueSet, cfg: RefineConfig) -> List[Tuple[Layout, bool]]:
    bnds, matches = _matches(layout, cues, cfg)
    if not matches:
        return []
    full = _apply(layout, bnds, matches)
    if full is not None and _max_move(layout, full) < cfg.min_move_px:
        # already sits where the cues put it: partial snaps would only undo that
        return []
    limit = 2 * cfg.d_align
    out: List[Tuple[Layout, bool]] = []

    def emit(moves, final):
        cand = _apply(layout, bnds, moves)
        if cand is None:
            return
        if final:
            cand = _settle(layout, cand, cues, cfg)
        if cfg.min_move_px <= _max_move(layout, cand) <= limit and all(cand != o for o, _ in out):
            out.append((cand, final))

    for key in sorted(matches):
        emit({key: matches[key]}, len(matches) == 1)
    if len(matches) > 1:
        emit(matches, True)
    return out


def align_layout(layout: Layout, cues: CueSet, cfg: RefineConfig = RefineConfig()) -> List[Layout]:
    """Aligned variants of ``layout``: one per single-boundary snap, then all snaps together.

    Returns an empty list when no boundary has a matching cue (or no snap
    changes anything); callers keep the original layout in that case.
    """
    return [l for l, _ in _align(layout, cues, cfg)]


def align_candidates(candidates, cues: CueSet, cfg: RefineConfig = RefineConfig()):
    """Candidates followed by the aligned variants of each, duplicates dropped."""
    from .proposal import ALIGNED_FINAL, ALIGNED_INTERMEDIATE, CandidateSet

    out = CandidateSet(candidates.image_id, cue_source=cues.source)
    seen = set()
    for layout, tag in zip(candidates.layouts, candidates.provenance):
        items = [(layout, tag)]
        items += [(v, ALIGNED_FINAL if final else ALIGNED_INTERMEDIATE) for v, final in _align(layout, cues, cfg)]
        for v, t in items:
            if v not in seen:
                seen.add(v)
                out.add(v, t)
    return out
