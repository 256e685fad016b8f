"""Random generic room layouts for desk-scale experiments.

Interior wall-wall boundaries are lines through a shared vertical vanishing
point sampled far outside the frame (or at infinity), so every sampled room
is perspective-consistent.  Walls leaving the frame are closed by virtual
edge boundaries on the image sides.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .geometry import Point
from .layout import Layout, WWBoundary, check, single_wall

CONFIGS = (("c", "w", "f"), ("w", "f"), ("c", "w"), ("w",))
CONFIG_PROBS = (0.6, 0.2, 0.1, 0.1)


@dataclass(frozen=True)
class SceneSpec:
    width: int = 128
    height: int = 128
    min_gap: float = 16.0
    margin: float = 10.0
    floor_band: Tuple[float, float] = (0.62, 0.88)
    ceil_band: Tuple[float, float] = (0.12, 0.36)
    vp_range: Tuple[float, float] = (1200.0, 4000.0)
    p_vertical_vp: float = 0.3


def stable_seed(global_seed: int, key: str) -> int:
    """Per-item seed derived from a global seed and a string id."""
    h = hashlib.sha256(f"{global_seed}:{key}".encode()).digest()
    return int.from_bytes(h[:8], "little")


def _sample_positions(rng: np.random.Generator, m: int, lo: float, hi: float, gap: float) -> np.ndarray:
    # stick-breaking with a guaranteed gap: uniform points in the slack, then re-spread
    slack = (hi - lo) - gap * (m - 1)
    if slack < 0:
        raise ValueError(f"cannot fit {m} boundaries with gap {gap}")
    u = np.sort(rng.uniform(0, slack, m))
    return lo + u + gap * np.arange(m)


def random_layout(
    rng: np.random.Generator,
    n_walls: int,
    spec: SceneSpec = SceneSpec(),
    config: Optional[Tuple[str, ...]] = None,
) -> Layout:
    w, h = spec.width, spec.height
    if config is None:
        config = CONFIGS[rng.choice(len(CONFIGS), p=CONFIG_PROBS)]
    has_c, has_f = "c" in config, "f" in config
    if not (has_c or has_f) and n_walls == 1:
        return single_wall(w, h)

    if rng.uniform() < spec.p_vertical_vp:
        vp = None
    else:
        vy = rng.uniform(*spec.vp_range) * (1 if rng.uniform() < 0.5 else -1)
        vp = Point(rng.uniform(0.3 * w, 0.7 * w), (h / 2 + vy))

    xs_mid = _sample_positions(rng, n_walls - 1, spec.margin, w - spec.margin, spec.min_gap)

    def x_on(xm: float, y: float) -> float:
        if vp is None:
            return xm
        return xm + (y - h / 2) * (vp.x - xm) / (vp.y - h / 2)

    bounds: List[WWBoundary] = []
    for xm in xs_mid:
        yf = rng.uniform(*spec.floor_band) * h if has_f else float(h)
        yc = rng.uniform(*spec.ceil_band) * h if has_c else 0.0
        bounds.append(WWBoundary(Point(x_on(xm, yf), yf), Point(x_on(xm, yc), yc), has_f, has_c))

    if has_c or has_f:
        edges = []
        for x in (0.0, float(w)):
            yf = rng.uniform(spec.floor_band[0] - 0.07, spec.floor_band[1] + 0.07) * h if has_f else float(h)
            yc = rng.uniform(spec.ceil_band[0] - 0.07, spec.ceil_band[1] + 0.04) * h if has_c else 0.0
            edges.append(WWBoundary(Point(x, yf), Point(x, yc), False, False))
        bounds = [edges[0]] + bounds + [edges[1]]
    return check(Layout(tuple(bounds), has_c, has_f, w, h))


def sample_wall_count(rng: np.random.Generator, lo: int, hi: int) -> int:
    return int(rng.integers(lo, hi + 1))


def displace_ridges(maps, shift_px: int):
    """Copy of ``maps`` with the ww boundary ridge and both corner planes moved
    ``shift_px`` pixels to the right (zero fill); wf/wc ridges untouched."""
    from .featuremaps import FeatureMaps

    def shift(a):
        out = np.zeros_like(a)
        if shift_px >= 0:
            out[..., shift_px:] = a[..., : a.shape[-1] - shift_px]
        else:
            out[..., :shift_px] = a[..., -shift_px:]
        return out

    boundary = maps.boundary.copy()
    boundary[0] = shift(boundary[0])
    boundary[3] = 1.0 - boundary[:3].max(axis=0)
    return FeatureMaps(shift(maps.corner), boundary, maps.seg.copy(), maps.complexity)
