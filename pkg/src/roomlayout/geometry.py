"""Planar primitives: points, segments, polygon fill, line fitting.

Image coordinates have x to the right and y downward.  Pixel ``(row, col)``
covers ``[col, col+1) x [row, row+1)`` and is sampled at its center
``(col + 0.5, row + 0.5)``; every rasterizer and pixel counter in the
package follows this rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DegenerateInput

PARALLEL_TOL_RAD = 1e-6
DEGENERATE_LEN_PX = 1e-9


class Point(NamedTuple):
    x: float
    y: float


def as_point(p) -> Point:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise DegenerateInput(f"non-finite point ({x}, {y})")
    return Point(x, y)


@dataclass(frozen=True)
class LineSegment:
    a: Point
    b: Point

    def __post_init__(self):
        object.__setattr__(self, "a", as_point(self.a))
        object.__setattr__(self, "b", as_point(self.b))
        if self.length <= DEGENERATE_LEN_PX:
            raise DegenerateInput(f"zero-length segment at {self.a}")

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)

    @property
    def midpoint(self) -> Point:
        return Point(0.5 * (self.a.x + self.b.x), 0.5 * (self.a.y + self.b.y))

    @property
    def direction(self) -> np.ndarray:
        d = np.array([self.b.x - self.a.x, self.b.y - self.a.y])
        return d / np.linalg.norm(d)

    @property
    def normal(self) -> np.ndarray:
        dx, dy = self.direction
        return np.array([-dy, dx])

    def line_distance(self, p) -> float:
        """Perpendicular distance from ``p`` to the infinite carrier line."""
        n = self.normal
        return abs(n[0] * (p[0] - self.a.x) + n[1] * (p[1] - self.a.y))

    def point_distance(self, p) -> float:
        """Distance from ``p`` to the closest point of the segment itself."""
        return float(point_segment_distance(np.asarray([p], float), [self])[0])

    def x_at(self, y: float) -> float:
        """x of the carrier line at height ``y`` (line must not be horizontal)."""
        dy = self.b.y - self.a.y
        return self.a.x + (y - self.a.y) * (self.b.x - self.a.x) / dy

    def reversed(self) -> "LineSegment":
        return LineSegment(self.b, self.a)


@dataclass(frozen=True)
class PolygonMask:
    width: int
    height: int
    bits: np.ndarray  # bool, shape (height, width)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != (self.height, self.width):
            raise ValueError(f"mask shape {bits.shape} != ({self.height}, {self.width})")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def count(self) -> int:
        return int(self.bits.sum())

    def __and__(self, other: "PolygonMask") -> "PolygonMask":
        return PolygonMask(self.width, self.height, self.bits & other.bits)

    def __or__(self, other: "PolygonMask") -> "PolygonMask":
        return PolygonMask(self.width, self.height, self.bits | other.bits)


def fit_segment(points: Iterable) -> LineSegment:
    """Total-least-squares segment through ``points``.

    The carrier line is the principal axis of the point cloud; endpoints are
    the extremal projections of the points onto it.
    """
    pts = np.asarray([tuple(p) for p in points], dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise DegenerateInput("need at least two points to fit a segment")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    if np.max(np.abs(centered)) <= DEGENERATE_LEN_PX:
        raise DegenerateInput("all points coincide")
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    d = vt[0]
    # canonical orientation keeps results independent of input order
    if d[1] < 0 or (d[1] == 0 and d[0] < 0):
        d = -d
    t = centered @ d
    a = centroid + t.min() * d
    b = centroid + t.max() * d
    return LineSegment(Point(*a), Point(*b))


def intersect(s1: LineSegment, s2: LineSegment) -> Optional[Point]:
    """Intersection of the two infinite carrier lines, None when parallel."""
    d1, d2 = s1.direction, s2.direction
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(cross) < math.sin(PARALLEL_TOL_RAD):
        return None
    w = np.array([s2.a.x - s1.a.x, s2.a.y - s1.a.y])
    t = (w[0] * d2[1] - w[1] * d2[0]) / cross
    return Point(s1.a.x + t * d1[0], s1.a.y + t * d1[1])


def angle_to(seg: LineSegment, p) -> float:
    """Angle in [0, pi/2] between ``seg`` and the ray from its midpoint to ``p``."""
    m = seg.midpoint
    v = np.array([p[0] - m.x, p[1] - m.y])
    nv = np.linalg.norm(v)
    if nv <= DEGENERATE_LEN_PX:
        return 0.0
    c = abs(float(seg.direction @ (v / nv)))
    return math.acos(min(1.0, c))


def orientation_diff(s1: LineSegment, s2: LineSegment) -> float:
    """Undirected angle between two segments, in [0, pi/2]."""
    c = abs(float(s1.direction @ s2.direction))
    return math.acos(min(1.0, c))


def deviation_from_vertical(seg: LineSegment) -> float:
    d = seg.direction
    return math.acos(min(1.0, abs(float(d[1]))))


def least_squares_point(segments: Sequence[LineSegment]) -> Optional[Point]:
    """Point minimizing the summed squared distance to the carrier lines."""
    A = np.zeros((2, 2))
    rhs = np.zeros(2)
    for s in segments:
        n = s.normal
        A += np.outer(n, n)
        rhs += n * (n @ np.array([s.a.x, s.a.y]))
    if abs(np.linalg.det(A)) < 1e-12 or np.linalg.cond(A) > 1e12:
        return None
    x = np.linalg.solve(A, rhs)
    return Point(float(x[0]), float(x[1]))


def point_segment_distance(points: np.ndarray, segments: Sequence[LineSegment]) -> np.ndarray:
    """Distance from each point (N, 2) to the nearest of ``segments``."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if not segments:
        return np.full(len(points), np.inf)
    a = np.array([[s.a.x, s.a.y] for s in segments])
    b = np.array([[s.b.x, s.b.y] for s in segments])
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("nij,ij->ni", ap, ab) / denom, 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    d = np.linalg.norm(points[:, None, :] - closest, axis=2)
    return d.min(axis=1)


def polygon_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def fill_polygon(vertices, width: int, height: int) -> np.ndarray:
    """Even-odd scanline fill at pixel centers; no validity checks."""
    v = np.asarray(vertices, dtype=float).reshape(-1, 2)
    out = np.zeros((height, width), dtype=bool)
    if len(v) < 3 or width <= 0 or height <= 0:
        return out
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    keep = y0 != y1  # horizontal edges never cross a scanline
    x0, y0, x1, y1 = x0[keep], y0[keep], x1[keep], y1[keep]
    if len(x0) == 0:
        return out
    yc = np.arange(height) + 0.5
    xc = np.arange(width) + 0.5
    ylo, yhi = np.minimum(y0, y1), np.maximum(y0, y1)
    # half-open rule: an edge spans [ylo, yhi)
    active = (yc[:, None] >= ylo[None]) & (yc[:, None] < yhi[None])
    t = (yc[:, None] - y0[None]) / (y1 - y0)[None]
    xcross = np.where(active, x0[None] + t * (x1 - x0)[None], np.inf)
    # count crossings strictly left of each pixel center
    left = (xcross[:, None, :] < xc[None, :, None]).sum(axis=2)
    out[:] = (left % 2) == 1
    return out


def rasterize_polygon(vertices, width: int, height: int) -> PolygonMask:
    """Fill a simple polygon into a ``width`` x ``height`` mask.

    A pixel is set when its center lies inside the polygon (even-odd rule);
    anything outside the image is clipped away.
    """
    v = np.asarray([tuple(p) for p in vertices], dtype=float)
    if len(v) < 3:
        raise DegenerateInput("polygon needs at least three vertices")
    if abs(polygon_area(v)) <= DEGENERATE_LEN_PX:
        raise DegenerateInput("polygon has zero area (collinear vertices)")
    return PolygonMask(width, height, fill_polygon(v, width, height))


def pixel_index(coord: float, size: int) -> int:
    return min(max(int(math.floor(coord)), 0), size - 1)


def bresenham(seg: LineSegment, width: int, height: int) -> np.ndarray:
    """Pixels (rows, cols) visited by Bresenham's walk between the endpoint pixels."""
    c0, r0 = int(math.floor(seg.a.x)), int(math.floor(seg.a.y))
    c1, r1 = int(math.floor(seg.b.x)), int(math.floor(seg.b.y))
    # endpoints exactly on the far image border belong to the last pixel
    c0, c1 = (min(c, width - 1) if c == width else c for c in (c0, c1))
    r0, r1 = (min(r, height - 1) if r == height else r for r in (r0, r1))
    dc, dr = abs(c1 - c0), -abs(r1 - r0)
    sc, sr = (1 if c0 < c1 else -1), (1 if r0 < r1 else -1)
    err = dc + dr
    rows, cols = [], []
    while True:
        rows.append(r0)
        cols.append(c0)
        if c0 == c1 and r0 == r1:
            break
        e2 = 2 * err
        if e2 >= dr:
            err += dr
            c0 += sc
        if e2 <= dc:
            err += dc
            r0 += sr
    rows, cols = np.array(rows), np.array(cols)
    ok = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
    return np.stack([rows[ok], cols[ok]])


def stroke_segment(seg: LineSegment, width: int, height: int, stroke_px: int = 1) -> np.ndarray:
    """Boolean raster of a stroked segment.

    Width 1 is the plain Bresenham line.  Wider strokes add every pixel whose
    center lies within ``stroke_px / 2`` of the segment, which keeps the stroke
    centered on the true line.
    """
    out = np.zeros((height, width), dtype=bool)
    rr, cc = bresenham(seg, width, height)
    out[rr, cc] = True
    if stroke_px > 1:
        half = stroke_px / 2.0
        xlo = max(int(math.floor(min(seg.a.x, seg.b.x) - half)), 0)
        xhi = min(int(math.ceil(max(seg.a.x, seg.b.x) + half)) + 1, width)
        ylo = max(int(math.floor(min(seg.a.y, seg.b.y) - half)), 0)
        yhi = min(int(math.ceil(max(seg.a.y, seg.b.y) + half)) + 1, height)
        if xlo < xhi and ylo < yhi:
            ys, xs = np.mgrid[ylo:yhi, xlo:xhi]
            pts = np.stack([xs.ravel() + 0.5, ys.ravel() + 0.5], axis=1)
            d = point_segment_distance(pts, [seg]).reshape(ys.shape)
            out[ylo:yhi, xlo:xhi] |= d <= half + 1e-9
    return out


def sample_polyline(segments: Sequence[LineSegment], k: int):
    """``k`` points spread uniformly by arc length over a set of segments.

    Returns ``(points (k, 2), directions (k, 2))``; sample j sits at arc
    length ``(j + 0.5) / k`` of the total.
    """
    if not segments:
        return np.zeros((0, 2)), np.zeros((0, 2))
    lengths = np.array([s.length for s in segments])
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = (np.arange(k) + 0.5) / k * cum[-1]
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(segments) - 1)
    a = np.array([[seg.a.x, seg.a.y] for seg in segments])
    d = np.array([seg.direction for seg in segments])
    local = s - cum[idx]
    pts = a[idx] + local[:, None] * d[idx]
    return pts, d[idx]


def bilinear(plane: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Sample ``plane`` at continuous image coordinates (pixel-center convention)."""
    h, w = plane.shape
    x = np.clip(pts[:, 0] - 0.5, 0, w - 1)
    y = np.clip(pts[:, 1] - 0.5, 0, h - 1)
    x0 = np.minimum(np.floor(x).astype(int), w - 2) if w > 1 else np.zeros(len(x), int)
    y0 = np.minimum(np.floor(y).astype(int), h - 2) if h > 1 else np.zeros(len(y), int)
    fx = x - x0 if w > 1 else np.zeros(len(x))
    fy = y - y0 if h > 1 else np.zeros(len(y))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    return (
        plane[y0, x0] * (1 - fx) * (1 - fy)
        + plane[y0, x1] * fx * (1 - fy)
        + plane[y1, x0] * (1 - fx) * fy
        + plane[y1, x1] * fx * fy
    )
