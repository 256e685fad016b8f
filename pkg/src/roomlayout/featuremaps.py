"""Layout feature maps and their synthetic oracle.

A :class:`FeatureMaps` bundle holds what a layout network would emit for one
image: a 2-channel corner map (wwf, wwc), a 4-channel boundary map (ww, wf,
wc, non-boundary), a 3-channel surface segmentation (wall, floor, ceiling)
and a scalar complexity level (number of visible walls).

:func:`render_oracle` draws these maps straight from a ground-truth layout,
optionally degraded by blur, additive noise and rectangular occluders.  The
segmentation is never occluded: it labels the room as if it were empty.
"""
from __future__ import annotations

import math
import os
import struct
import tempfile
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .errors import FormatError, RangeError
from .layout import CEILING, FLOOR, WALL, Layout, boundary_segments, check, label_map, wall_index_map
from .geometry import stroke_segment

MAGIC = b"RSNM"
VERSION = 1
ROLE_CORNER, ROLE_BOUNDARY, ROLE_SEG = 0, 1, 2
ROLE_CHANNELS = {ROLE_CORNER: 2, ROLE_BOUNDARY: 4, ROLE_SEG: 3}
RANGE_TOL = 1e-4
# ridges must survive the 3x3 opening used by line detection
STROKE_PX = 3


@dataclass(eq=False)
class FeatureMaps:
    corner: np.ndarray  # (2, H, W)
    boundary: np.ndarray  # (4, H, W)
    seg: np.ndarray  # (3, H, W)
    complexity: float

    def __post_init__(self):
        self.corner = np.ascontiguousarray(self.corner, dtype=np.float32)
        self.boundary = np.ascontiguousarray(self.boundary, dtype=np.float32)
        self.seg = np.ascontiguousarray(self.seg, dtype=np.float32)
        self.complexity = float(np.float32(self.complexity))
        shapes = {self.corner.shape[1:], self.boundary.shape[1:], self.seg.shape[1:]}
        if len(shapes) != 1:
            raise FormatError(f"map planes disagree in size: {sorted(shapes)}")
        for name, arr, n in (("corner", self.corner, 2), ("boundary", self.boundary, 4), ("seg", self.seg, 3)):
            if arr.ndim != 3 or arr.shape[0] != n:
                raise FormatError(f"{name} map must have {n} channels, got shape {arr.shape}")

    @property
    def height(self) -> int:
        return self.seg.shape[1]

    @property
    def width(self) -> int:
        return self.seg.shape[2]

    def validate(self) -> None:
        """Raise RangeError when a confidence or label falls outside its range."""
        for name, arr in (("corner", self.corner), ("boundary", self.boundary), ("seg", self.seg)):
            if not np.all(np.isfinite(arr)):
                raise RangeError(f"{name} map has non-finite values")
            if arr.min() < -RANGE_TOL or arr.max() > 1 + RANGE_TOL:
                raise RangeError(f"{name} map values outside [0, 1]: [{arr.min()}, {arr.max()}]")
        s = self.seg.sum(axis=0)
        if np.abs(s - 1).max() > RANGE_TOL:
            raise RangeError("segmentation channels do not sum to 1")
        if not (math.isfinite(self.complexity) and self.complexity >= 0):
            raise RangeError(f"complexity must be >= 0, got {self.complexity}")

    def seg_labels(self) -> np.ndarray:
        """Hard per-pixel surface label from the segmentation argmax."""
        return np.argmax(self.seg, axis=0).astype(np.int8)


@dataclass(frozen=True)
class NoiseConfig:
    blur_sigma: float = 0.0
    additive_noise_sigma: float = 0.0
    occlusion_boxes: int = 0
    occlusion_max_frac: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for k in ("blur_sigma", "additive_noise_sigma", "occlusion_boxes", "occlusion_max_frac", "seed"):
            if getattr(self, k) < 0:
                raise ValueError(f"{k} must be non-negative")
        if self.occlusion_max_frac > 0.5:
            raise ValueError("occlusion_max_frac must be <= 0.5")


def predict_wall_count(c: float) -> int:
    """Discrete wall-count cap from the complexity scalar (nearest, at least 1)."""
    if c < 0:
        raise ValueError("complexity must be >= 0")
    return max(1, int(math.floor(c + 0.5)))


@lru_cache(maxsize=32)
def _line_peak(sigma: float) -> float:
    # peak response of a blurred stroke; used to renormalize ridges to 1
    profile = np.zeros(64)
    profile[31:31 + STROKE_PX] = 1.0
    return float(ndimage.gaussian_filter1d(profile, sigma).max())


def render_boundary_planes(layout: Layout, blur_sigma: float = 0.0) -> np.ndarray:
    w, h = layout.image_width, layout.image_height
    planes = np.zeros((4, h, w), dtype=np.float64)
    segs = boundary_segments(layout)
    for k, name in enumerate(("ww", "wf", "wc")):
        for s in segs[name]:
            planes[k][stroke_segment(s, w, h, STROKE_PX)] = 1.0
        if blur_sigma > 0:
            planes[k] = np.clip(ndimage.gaussian_filter(planes[k], blur_sigma) / _line_peak(blur_sigma), 0, 1)
    planes[3] = 1.0 - planes[:3].max(axis=0)
    return planes


def visible_corners(layout: Layout):
    """Corners that are visible and strictly inside the frame, per type."""
    w, h = layout.image_width, layout.image_height
    inside = lambda p: 0 < p.x < w and 0 < p.y < h  # noqa: E731
    wwf = [b.floor_corner for b in layout.interior if layout.has_floor and b.floor_visible and inside(b.floor_corner)]
    wwc = [b.ceil_corner for b in layout.interior if layout.has_ceiling and b.ceil_visible and inside(b.ceil_corner)]
    return wwf, wwc


def render_corner_planes(layout: Layout, sigma: float) -> np.ndarray:
    w, h = layout.image_width, layout.image_height
    xc = np.arange(w) + 0.5
    yc = np.arange(h) + 0.5
    planes = np.zeros((2, h, w), dtype=np.float64)
    for k, pts in enumerate(visible_corners(layout)):
        for p in pts:
            gx = np.exp(-((xc - p.x) ** 2) / (2 * sigma**2))
            gy = np.exp(-((yc - p.y) ** 2) / (2 * sigma**2))
            np.maximum(planes[k], gy[:, None] * gx[None, :], out=planes[k])
    return planes


def render_oracle(layout: Layout, noise: NoiseConfig = NoiseConfig()) -> FeatureMaps:
    """Feature maps a perfect network would predict for ``layout``, then degraded."""
    check(layout)
    w, h = layout.image_width, layout.image_height
    boundary = render_boundary_planes(layout, noise.blur_sigma)
    corner = render_corner_planes(layout, max(2.0, noise.blur_sigma))
    labels = label_map(layout)
    seg = np.stack([labels == WALL, labels == FLOOR, labels == CEILING]).astype(np.float64)

    rng = np.random.default_rng(noise.seed)
    if noise.additive_noise_sigma > 0:
        boundary[:3] += rng.normal(0, noise.additive_noise_sigma, boundary[:3].shape)
        corner += rng.normal(0, noise.additive_noise_sigma, corner.shape)
    for _ in range(int(noise.occlusion_boxes)):
        if noise.occlusion_max_frac <= 0:
            break
        area = rng.uniform(0.25, 1.0) * noise.occlusion_max_frac * w * h
        aspect = math.exp(rng.uniform(-0.7, 0.7))
        bw = int(min(w, max(1, round(math.sqrt(area * aspect)))))
        bh = int(min(h, max(1, round(area / max(bw, 1)))))
        x0 = int(rng.integers(0, w - bw + 1))
        y0 = int(rng.integers(0, h - bh + 1))
        boundary[:3, y0:y0 + bh, x0:x0 + bw] = 0.0
        corner[:, y0:y0 + bh, x0:x0 + bw] = 0.0
    np.clip(boundary, 0, 1, out=boundary)
    np.clip(corner, 0, 1, out=corner)
    boundary[3] = 1.0 - boundary[:3].max(axis=0)
    return FeatureMaps(corner, boundary, seg, float(layout.n_walls))


# intensities for the synthetic photo; neighbouring walls always differ
_PHOTO_FLOOR = 0.2
_PHOTO_CEILING = 0.9
_PHOTO_WALLS = (0.45, 0.6, 0.72)


def render_photo(layout: Layout, blur_sigma: float = 0.0, noise_sigma: float = 0.0, seed: int = 0) -> np.ndarray:
    """Grayscale image of the empty room with flat-shaded surfaces, in [0, 1]."""
    check(layout)
    labels = label_map(layout)
    index = wall_index_map(layout)
    img = np.empty(labels.shape, dtype=np.float64)
    img[labels == FLOOR] = _PHOTO_FLOOR
    img[labels == CEILING] = _PHOTO_CEILING
    walls = labels == WALL
    img[walls] = np.asarray(_PHOTO_WALLS)[index[walls] % len(_PHOTO_WALLS)]
    if blur_sigma > 0:
        img = ndimage.gaussian_filter(img, blur_sigma)
    if noise_sigma > 0:
        img = img + np.random.default_rng(seed).normal(0, noise_sigma, img.shape)
    return np.clip(img, 0, 1).astype(np.float32)


# -- container file -----------------------------------------------------------

def dumps(maps: FeatureMaps) -> bytes:
    maps.validate()
    h, w = maps.height, maps.width
    parts = [MAGIC, struct.pack("<HII", VERSION, w, h)]
    for role, arr in ((ROLE_CORNER, maps.corner), (ROLE_BOUNDARY, maps.boundary), (ROLE_SEG, maps.seg)):
        parts.append(struct.pack("<BB", role, arr.shape[0]))
        parts.append(arr.astype("<f4").tobytes(order="C"))
    parts.append(struct.pack("<f", maps.complexity))
    return b"".join(parts)


def loads(data: bytes) -> FeatureMaps:
    if len(data) < 14 or data[:4] != MAGIC:
        raise FormatError("bad magic: not a feature-map container")
    version, w, h = struct.unpack_from("<HII", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    off = 14
    blocks = {}
    for _ in range(3):
        if off + 2 > len(data):
            raise FormatError("truncated block header")
        role, n = struct.unpack_from("<BB", data, off)
        off += 2
        if role not in ROLE_CHANNELS:
            raise FormatError(f"unknown role byte {role}")
        if role in blocks:
            raise FormatError(f"duplicate block for role {role}")
        if n != ROLE_CHANNELS[role]:
            raise FormatError(f"role {role} declares {n} channels, expected {ROLE_CHANNELS[role]}")
        nbytes = 4 * n * w * h
        if off + nbytes > len(data):
            raise FormatError("truncated plane data")
        blocks[role] = np.frombuffer(data, dtype="<f4", count=n * w * h, offset=off).reshape(n, h, w).astype(np.float32)
        off += nbytes
    if off + 4 != len(data):
        raise FormatError("truncated or oversized trailer")
    (c,) = struct.unpack_from("<f", data, off)
    maps = FeatureMaps(blocks[ROLE_CORNER], blocks[ROLE_BOUNDARY], blocks[ROLE_SEG], c)
    maps.validate()
    return maps


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_maps(maps: FeatureMaps, path) -> None:
    atomic_write_bytes(path, dumps(maps))


def load_maps(path) -> FeatureMaps:
    with open(path, "rb") as f:
        return loads(f.read())
