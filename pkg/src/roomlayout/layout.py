"""Generic (non-cuboidal) room layouts.

A layout is an ordered list of wall-wall boundaries.  Each boundary joins a
wall-wall-floor corner to a wall-wall-ceiling corner.  A boundary whose two
corners both sit on the left (x = 0) or right (x = width) image edge is a
*virtual* edge boundary: it only anchors the slanted floor/ceiling segment of
a wall that leaves the frame, it is not drawn and it does not add a wall.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidLayout, MissingSurface
from .geometry import LineSegment, Point, PolygonMask, as_point, fill_polygon, stroke_segment

EDGE_TOL = 1e-6

# surface label values used by label maps and the segmentation channels
WALL, FLOOR, CEILING = 0, 1, 2


@dataclass(frozen=True)
class WWBoundary:
    floor_corner: Point
    ceil_corner: Point
    floor_visible: bool = True
    ceil_visible: bool = True

    def __post_init__(self):
        object.__setattr__(self, "floor_corner", as_point(self.floor_corner))
        object.__setattr__(self, "ceil_corner", as_point(self.ceil_corner))


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    index: Optional[int] = None

    def __str__(self):
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True)
class Layout:
    boundaries: Tuple[WWBoundary, ...]
    has_ceiling: bool
    has_floor: bool
    image_width: int
    image_height: int

    def __post_init__(self):
        object.__setattr__(self, "boundaries", tuple(self.boundaries))
        object.__setattr__(self, "has_ceiling", bool(self.has_ceiling))
        object.__setattr__(self, "has_floor", bool(self.has_floor))
        object.__setattr__(self, "image_width", int(self.image_width))
        object.__setattr__(self, "image_height", int(self.image_height))

    # -- structure -------------------------------------------------------
    def edge_side(self, b: WWBoundary) -> Optional[str]:
        w = self.image_width
        xs = (b.floor_corner.x, b.ceil_corner.x)
        if all(abs(x) <= EDGE_TOL for x in xs):
            return "left"
        if all(abs(x - w) <= EDGE_TOL for x in xs):
            return "right"
        return None

    @property
    def interior(self) -> List[WWBoundary]:
        return [b for b in self.boundaries if self.edge_side(b) is None]

    @property
    def n_walls(self) -> int:
        return len(self.interior) + 1

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.image_width, self.image_height))

    def floor_corners(self) -> List[Point]:
        return [b.floor_corner for b in self.boundaries]

    def ceil_corners(self) -> List[Point]:
        return [b.ceil_corner for b in self.boundaries]

    def key(self) -> tuple:
        """Deterministic sort key (lexicographic over corners and flags)."""
        return (
            not self.has_ceiling,
            not self.has_floor,
            tuple((round(b.floor_corner.x, 6), round(b.floor_corner.y, 6),
                   round(b.ceil_corner.x, 6), round(b.ceil_corner.y, 6)) for b in self.boundaries),
        )

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "image_width": self.image_width,
            "image_height": self.image_height,
            "has_ceiling": self.has_ceiling,
            "has_floor": self.has_floor,
            "boundaries": [
                {
                    "fx": b.floor_corner.x,
                    "fy": b.floor_corner.y,
                    "cx": b.ceil_corner.x,
                    "cy": b.ceil_corner.y,
                    "floor_visible": b.floor_visible,
                    "ceil_visible": b.ceil_visible,
                }
                for b in self.boundaries
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Layout":
        return cls(
            boundaries=tuple(
                WWBoundary(
                    Point(float(b["fx"]), float(b["fy"])),
                    Point(float(b["cx"]), float(b["cy"])),
                    bool(b.get("floor_visible", True)),
                    bool(b.get("ceil_visible", True)),
                )
                for b in d["boundaries"]
            ),
            has_ceiling=d["has_ceiling"],
            has_floor=d["has_floor"],
            image_width=d["image_width"],
            image_height=d["image_height"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Layout":
        return cls.from_dict(json.loads(text))


def single_wall(width: int, height: int) -> Layout:
    """The degenerate {w} layout: one wall filling the frame."""
    return Layout((), False, False, width, height)


def validate(layout: Layout) -> List[Violation]:
    """Return every broken invariant of ``layout`` (empty when valid).

    Wall verticality is not checked here; it is a perspective property
    enforced by the vanishing-point test during proposal.
    """
    out: List[Violation] = []
    w, h = layout.image_width, layout.image_height
    if w <= 0 or h <= 0:
        out.append(Violation("BadImageSize", f"{w}x{h}"))
        return out
    bs = layout.boundaries
    for i, b in enumerate(bs):
        for name, p in (("floor", b.floor_corner), ("ceiling", b.ceil_corner)):
            if not (-EDGE_TOL <= p.x <= w + EDGE_TOL and -EDGE_TOL <= p.y <= h + EDGE_TOL):
                out.append(Violation("OutOfImage", f"{name} corner {tuple(p)} of boundary {i}", i))
        if not b.ceil_corner.y < b.floor_corner.y:
            out.append(Violation("InvertedBoundary", f"boundary {i} has ceiling corner not above floor corner", i))
    for i in range(1, len(bs)):
        if not bs[i].floor_corner.x > bs[i - 1].floor_corner.x:
            out.append(Violation("OrderingViolation", f"floor corners {i - 1},{i} not strictly increasing in x", i))
        if bs[i].ceil_corner.x < bs[i - 1].ceil_corner.x:
            out.append(Violation("CrossingBoundaries", f"ceiling corners {i - 1},{i} out of order", i))
    if not bs and (layout.has_floor or layout.has_ceiling):
        out.append(Violation("UndefinedSurface", "floor/ceiling present but no boundaries to bound it"))
    return out


def check(layout: Layout) -> Layout:
    v = validate(layout)
    if v:
        raise InvalidLayout(v)
    return layout


def _chain(points: Sequence[Point], width: int) -> List[Point]:
    """Corner chain closed horizontally to both image sides."""
    pts = list(points)
    if pts[0].x > EDGE_TOL:
        pts.insert(0, Point(0.0, pts[0].y))
    if pts[-1].x < width - EDGE_TOL:
        pts.append(Point(float(width), pts[-1].y))
    return pts


def _chain_segments(points: Sequence[Point], layout: Layout) -> List[LineSegment]:
    segs = []
    w, h = layout.image_width, layout.image_height
    for p, q in zip(points[:-1], points[1:]):
        if abs(p.x - q.x) + abs(p.y - q.y) <= 1e-9:
            continue
        # a run along the image frame is not a visible boundary
        if (abs(p.y - q.y) <= EDGE_TOL and (abs(p.y) <= EDGE_TOL or abs(p.y - h) <= EDGE_TOL)):
            continue
        if (abs(p.x - q.x) <= EDGE_TOL and (abs(p.x) <= EDGE_TOL or abs(p.x - w) <= EDGE_TOL)):
            continue
        segs.append(LineSegment(p, q))
    return segs


def wf_segments(layout: Layout) -> List[LineSegment]:
    """Wall-floor segments: consecutive wwf corners, plus horizontal closures
    from the first/last corner to the image sides when those corners are
    not already on the sides."""
    if not layout.has_floor:
        raise MissingSurface("layout has no floor")
    if not layout.boundaries:
        return []
    return _chain_segments(_chain(layout.floor_corners(), layout.image_width), layout)


def wc_segments(layout: Layout) -> List[LineSegment]:
    if not layout.has_ceiling:
        raise MissingSurface("layout has no ceiling")
    if not layout.boundaries:
        return []
    return _chain_segments(_chain(layout.ceil_corners(), layout.image_width), layout)


def ww_segments(layout: Layout) -> List[LineSegment]:
    segs = []
    for b in layout.interior:
        if b.floor_corner != b.ceil_corner:
            segs.append(LineSegment(b.ceil_corner, b.floor_corner))
    return segs


def boundary_segments(layout: Layout) -> dict:
    """All drawn boundaries keyed by class name ``ww``, ``wf``, ``wc``."""
    return {
        "ww": ww_segments(layout),
        "wf": wf_segments(layout) if layout.has_floor else [],
        "wc": wc_segments(layout) if layout.has_ceiling else [],
    }


@dataclass(frozen=True)
class BoundaryImage:
    width: int
    height: int
    channels: np.ndarray  # (3, H, W) float32: ww, wf, wc

    def __post_init__(self):
        c = np.clip(np.asarray(self.channels, dtype=np.float32), 0.0, 1.0)
        if c.shape != (3, self.height, self.width):
            raise ValueError(f"boundary image must be (3, {self.height}, {self.width}), got {c.shape}")
        object.__setattr__(self, "channels", c)


def render_boundary_image(layout: Layout, stroke_px: int = 2) -> BoundaryImage:
    check(layout)
    w, h = layout.image_width, layout.image_height
    planes = np.zeros((3, h, w), dtype=np.float32)
    for k, name in enumerate(("ww", "wf", "wc")):
        for seg in boundary_segments(layout)[name]:
            planes[k][stroke_segment(seg, w, h, stroke_px)] = 1.0
    return BoundaryImage(w, h, planes)


@dataclass(frozen=True)
class SurfaceMasks:
    floor: PolygonMask
    ceiling: PolygonMask
    walls: Tuple[PolygonMask, ...] = field(default_factory=tuple)

    @property
    def wall_union(self) -> PolygonMask:
        bits = np.zeros((self.floor.height, self.floor.width), bool)
        for m in self.walls:
            bits |= m.bits
        return PolygonMask(self.floor.width, self.floor.height, bits)


def floor_polygon(layout: Layout) -> List[Point]:
    w, h = layout.image_width, layout.image_height
    return _chain(layout.floor_corners(), w) + [Point(float(w), float(h)), Point(0.0, float(h))]


def ceiling_polygon(layout: Layout) -> List[Point]:
    w = layout.image_width
    return [Point(0.0, 0.0), Point(float(w), 0.0)] + _chain(layout.ceil_corners(), w)[::-1]


@lru_cache(maxsize=8192)
def _label_maps(layout: Layout):
    w, h = layout.image_width, layout.image_height
    if layout.has_floor and layout.boundaries:
        floor = fill_polygon(floor_polygon(layout), w, h)
    else:
        floor = np.zeros((h, w), bool)
    if layout.has_ceiling and layout.boundaries:
        ceiling = fill_polygon(ceiling_polygon(layout), w, h) & ~floor
    else:
        ceiling = np.zeros((h, w), bool)
    wall = ~(floor | ceiling)
    index = np.zeros((h, w), dtype=np.int16)
    xc = np.arange(w)[None, :] + 0.5
    yc = np.arange(h)[:, None] + 0.5
    for b in layout.interior:
        c, f = b.ceil_corner, b.floor_corner
        dx, dy = f.x - c.x, f.y - c.y
        cross = dx * (yc - c.y) - dy * (xc - c.x)
        index += (cross < 0).astype(np.int16)
    labels = np.full((h, w), WALL, dtype=np.int8)
    labels[floor] = FLOOR
    labels[ceiling] = CEILING
    index[~wall] = -1
    for a in (labels, index):
        a.setflags(write=False)
    return labels, index


def label_map(layout: Layout) -> np.ndarray:
    """Per-pixel surface label (WALL / FLOOR / CEILING); read-only, cached."""
    return _label_maps(layout)[0]


def wall_index_map(layout: Layout) -> np.ndarray:
    """Per-pixel wall number counted from the left, -1 off the walls."""
    return _label_maps(layout)[1]


def surface_masks(layout: Layout) -> SurfaceMasks:
    """Floor, ceiling and per-wall masks; together they partition the image."""
    check(layout)
    w, h = layout.image_width, layout.image_height
    labels, index = _label_maps(layout)
    walls = tuple(PolygonMask(w, h, index == j) for j in range(layout.n_walls))
    return SurfaceMasks(
        floor=PolygonMask(w, h, labels == FLOOR),
        ceiling=PolygonMask(w, h, labels == CEILING),
        walls=walls,
    )
