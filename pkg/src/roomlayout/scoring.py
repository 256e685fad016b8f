"""Layout margins, a linear layout scorer and its max-margin training.

The margin between two layouts is a line term (boundary samples compared by
distance and orientation) plus an area term (coverage and IoU of surface
masks).  The scorer is linear in a fixed vector of joint layout/map features,
so both the structured hinge objectives and the L2 regression baseline are
convex and trained by plain mini-batch subgradient descent.
"""
from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionMismatch, EmptyCandidates, EmptyDataset, FormatError, LengthMismatch, NonFiniteLoss
from .featuremaps import FeatureMaps, predict_wall_count, visible_corners
from .geometry import bilinear, point_segment_distance, sample_polyline
from .layout import CEILING, FLOOR, WALL, Layout, boundary_segments, label_map

LINE_SAMPLES = 64
CLASSES = ("ww", "wf", "wc")
FEATURE_VERSION = "jf16-v1"
FEATURE_NAMES = (
    "ridge_ww", "ridge_wf", "ridge_wc", "non_boundary",
    "corner_wwf", "corner_wwc",
    "seg_floor", "seg_wall", "seg_ceiling",
    "wall_count_gap", "low_confidence",
    "area_floor", "area_wall", "area_ceiling",
    "ridge_coverage", "const",
)
N_FEATURES = len(FEATURE_NAMES)
LOSS_KINDS = ("structure_sum", "structure_max", "l2")

# a map pixel counts as a confident ridge above this, and as "dark" below LOW_CONF
RIDGE_CONF = 0.5
LOW_CONF = 0.1
COVER_RADIUS = 2.5
# fewer confident pixels than this means the map sees no such class
MIN_MASS_PX = 8


def _same_dims(a: Layout, b: Layout) -> None:
    if (a.image_width, a.image_height) != (b.image_width, b.image_height):
        raise DimensionMismatch(
            f"layouts differ in size: {a.image_width}x{a.image_height} vs {b.image_width}x{b.image_height}"
        )


# -- margins -----------------------------------------------------------------

def _line_terms(a: Sequence, b: Sequence, diag: float, k: int) -> Tuple[float, float]:
    if not a and not b:
        return 0.0, 0.0
    if not a or not b:
        return 1.0, 1.0
    pa, da = sample_polyline(a, k)
    pb, db = sample_polyline(b, k)
    dist_ab, idx_ab = cKDTree(pb).query(pa)
    dist_ba, idx_ba = cKDTree(pa).query(pb)
    chamfer = 0.5 * (dist_ab.mean() + dist_ba.mean())
    pixel = (chamfer / diag) ** 2
    # boundaries are undirected, so orientation agreement is |cos|
    cos_ab = np.abs(np.einsum("ij,ij->i", da, db[idx_ab]))
    cos_ba = np.abs(np.einsum("ij,ij->i", db, da[idx_ba]))
    angular = float(np.mean(1.0 - np.minimum(np.concatenate([cos_ab, cos_ba]), 1.0)))
    return float(pixel), angular


def line_terms(layout: Layout, gt: Layout, k: int = LINE_SAMPLES) -> Dict[str, Tuple[float, float]]:
    """Per-class (pixel, angular) parts of :func:`d_line`."""
    _same_dims(layout, gt)
    sa, sb = boundary_segments(layout), boundary_segments(gt)
    return {c: _line_terms(sa[c], sb[c], gt.diagonal, k) for c in CLASSES}


def d_line(layout: Layout, gt: Layout, k: int = LINE_SAMPLES) -> float:
    return float(sum(p + a for p, a in line_terms(layout, gt, k).values()))


def _area_term(m: np.ndarray, g: np.ndarray) -> float:
    nm, ng = int(m.sum()), int(g.sum())
    if nm == 0 and ng == 0:
        return 0.0
    if ng == 0:
        return 2.0
    inter = int(np.count_nonzero(m & g))
    union = nm + ng - inter
    return 2.0 - inter / ng - inter / union


def d_area(layout: Layout, gt: Layout, floor_only: bool = True) -> float:
    _same_dims(layout, gt)
    la, lg = label_map(layout), label_map(gt)
    classes = (FLOOR,) if floor_only else (FLOOR, WALL, CEILING)
    return float(sum(_area_term(la == c, lg == c) for c in classes))


@dataclass(frozen=True)
class MarginBreakdown:
    d_line: float
    d_area: float

    @property
    def total(self) -> float:
        return self.d_line + self.d_area


def margin(layout: Layout, gt: Layout, floor_only: bool = True) -> MarginBreakdown:
    return MarginBreakdown(d_line(layout, gt), d_area(layout, gt, floor_only))


# -- joint features ----------------------------------------------------------

@dataclass
class _MapStats:
    ridge_pts: List[np.ndarray]  # confident ridge pixel centers per class
    class_mass: np.ndarray  # argmax pixel count per surface label
    low: np.ndarray  # (H, W) bool, no boundary class above LOW_CONF


_map_cache: "weakref.WeakKeyDictionary[FeatureMaps, _MapStats]" = weakref.WeakKeyDictionary()


def _map_stats(maps: FeatureMaps) -> _MapStats:
    st = _map_cache.get(maps)
    if st is None:
        pts = []
        for k in range(3):
            rr, cc = np.nonzero(maps.boundary[k] > RIDGE_CONF)
            pts.append(np.stack([cc + 0.5, rr + 0.5], axis=1))
        mass = np.bincount(maps.seg_labels().ravel(), minlength=3)
        st = _MapStats(pts, mass, maps.boundary[:3].max(axis=0) < LOW_CONF)
        _map_cache[maps] = st
    return st


def _stroke_samples(segs) -> np.ndarray:
    if not segs:
        return np.zeros((0, 2))
    n = max(2, int(math.ceil(sum(s.length for s in segs))))
    return sample_polyline(segs, n)[0]


def joint_features(layout: Layout, maps: FeatureMaps) -> np.ndarray:
    """The scorer's input: a length-16 vector describing how well ``layout``
    agrees with ``maps`` (see ``FEATURE_NAMES``)."""
    w, h = layout.image_width, layout.image_height
    if (maps.width, maps.height) != (w, h):
        raise DimensionMismatch(f"maps are {maps.width}x{maps.height}, layout is {w}x{h}")
    st = _map_stats(maps)
    f = np.zeros(N_FEATURES)
    segs = boundary_segments(layout)
    samples = [_stroke_samples(segs[c]) for c in CLASSES]
    for k, pts in enumerate(samples):
        if len(pts):
            f[k] = bilinear(maps.boundary[k], pts).mean()
        else:
            f[k] = 1.0 if len(st.ridge_pts[k]) < MIN_MASS_PX else 0.0
    allpts = np.concatenate(samples)
    if len(allpts):
        f[3] = bilinear(maps.boundary[3], allpts).mean()
        ij = np.clip(np.floor(allpts).astype(int), 0, [w - 1, h - 1])
        f[10] = st.low[ij[:, 1], ij[:, 0]].mean()
    for k, corners in enumerate(visible_corners(layout)):
        if corners:
            f[4 + k] = bilinear(maps.corner[k], np.array(corners, dtype=float)).mean()
        else:
            f[4 + k] = 1.0 if maps.corner[k].max() < RIDGE_CONF else 0.0
    labels = label_map(layout)
    for j, lab in enumerate((FLOOR, WALL, CEILING)):
        mask = labels == lab
        n = int(mask.sum())
        if n:
            f[6 + j] = maps.seg[lab][mask].mean()
        else:
            f[6 + j] = 1.0 if st.class_mass[lab] < MIN_MASS_PX else 0.0
        f[11 + j] = n / (w * h)
    f[9] = abs(layout.n_walls - predict_wall_count(maps.complexity))
    covered = total = 0
    for k, c in enumerate(CLASSES):
        pts = st.ridge_pts[k]
        total += len(pts)
        if len(pts) and segs[c]:
            covered += int(np.count_nonzero(point_segment_distance(pts, segs[c]) <= COVER_RADIUS))
    f[14] = covered / total if total else 1.0
    f[15] = 1.0
    return f


def feature_matrix(layouts: Sequence[Layout], maps: FeatureMaps) -> np.ndarray:
    return np.array([joint_features(l, maps) for l in layouts]).reshape(len(layouts), N_FEATURES)


# -- scorer ------------------------------------------------------------------

@dataclass
class ScorerParams:
    weights: np.ndarray
    bias: float = 0.0
    version: str = FEATURE_VERSION

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).ravel()
        self.bias = float(self.bias)
        if self.weights.shape != (N_FEATURES,):
            raise DimensionMismatch(f"expected {N_FEATURES} weights, got {self.weights.size}")
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise ValueError("scorer parameters must be finite")

    @classmethod
    def zeros(cls) -> "ScorerParams":
        return cls(np.zeros(N_FEATURES), 0.0)

    def dumps(self) -> str:
        lines = [f"version {self.version}", f"features {N_FEATURES}"]
        lines += [f"w {name} {v!r}" for name, v in zip(FEATURE_NAMES, self.weights.tolist())]
        lines.append(f"bias {self.bias!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ScorerParams":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        try:
            head = dict((r[0], r[1]) for r in rows if r[0] in ("version", "features"))
            if head.get("version") != FEATURE_VERSION:
                raise FormatError(f"scorer version {head.get('version')!r} does not match {FEATURE_VERSION!r}")
            if int(head.get("features", -1)) != N_FEATURES:
                raise FormatError(f"scorer declares {head.get('features')} features, expected {N_FEATURES}")
            ws = [float(r[2]) for r in rows if r[0] == "w"]
            bias = [float(r[1]) for r in rows if r[0] == "bias"]
        except (IndexError, ValueError) as e:
            raise FormatError(f"malformed scorer file: {e}") from None
        if len(ws) != N_FEATURES or len(bias) != 1:
            raise FormatError("scorer file is missing weights or bias")
        return cls(np.array(ws), bias[0])

    def save(self, path) -> None:
        from .featuremaps import atomic_write_bytes

        atomic_write_bytes(path, self.dumps().encode())

    @classmethod
    def load(cls, path) -> "ScorerParams":
        return cls.loads(Path(path).read_text())


def score(layout: Layout, maps: FeatureMaps, params: ScorerParams) -> float:
    return float(params.weights @ joint_features(layout, maps) + params.bias)


def score_all(layouts: Sequence[Layout], maps: FeatureMaps, params: ScorerParams) -> np.ndarray:
    if not layouts:
        return np.zeros(0)
    return feature_matrix(layouts, maps) @ params.weights + params.bias


def argmax_first(scores) -> int:
    """Index of the largest score, lowest index on ties."""
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise EmptyCandidates("no candidates to choose from")
    return int(np.flatnonzero(s == s.max())[0])


def select_best(candidates, maps: FeatureMaps, params: ScorerParams) -> Layout:
    layouts = list(getattr(candidates, "layouts", candidates))
    if not layouts:
        raise EmptyCandidates(f"empty candidate set{_id_suffix(candidates)}")
    return layouts[argmax_first(score_all(layouts, maps, params))]


def rank(candidates, maps: FeatureMaps, params: ScorerParams) -> np.ndarray:
    """Candidate indices ordered by score, best first (stable on ties)."""
    layouts = list(getattr(candidates, "layouts", candidates))
    return np.argsort(-score_all(layouts, maps, params), kind="stable")


def _id_suffix(candidates) -> str:
    iid = getattr(candidates, "image_id", "")
    return f" for image {iid!r}" if iid else ""


# -- structured costs --------------------------------------------------------

def hinge_terms(scores, gt_score: float, margins) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    m = np.asarray(margins, dtype=float)
    if s.shape != m.shape:
        raise LengthMismatch(f"{s.size} scores vs {m.size} margins")
    return np.maximum(0.0, s + m - gt_score)


def structure_cost(scores, gt_score: float, margins, kind: str = "structure_sum") -> float:
    e = hinge_terms(scores, gt_score, margins)
    if kind == "structure_sum":
        return float(e.sum())
    if kind == "structure_max":
        return float(e.max()) if e.size else 0.0
    raise ValueError(f"unknown structure cost {kind!r}")


@dataclass
class TrainingExample:
    """Precomputed features and margins of one training image."""
    X: np.ndarray  # (n, F) candidate features
    x_gt: np.ndarray  # (F,) features of the ground truth
    margins: np.ndarray  # (n,) margin of each candidate to the ground truth
    image_id: str = ""


def prepare_example(maps: FeatureMaps, gt: Layout, candidates, floor_only: bool = True) -> TrainingExample:
    layouts = list(getattr(candidates, "layouts", candidates))
    if not layouts:
        raise EmptyCandidates(f"empty candidate set{_id_suffix(candidates)}")
    return TrainingExample(
        feature_matrix(layouts, maps),
        joint_features(gt, maps),
        np.array([margin(l, gt, floor_only).total for l in layouts]),
        getattr(candidates, "image_id", ""),
    )


def example_loss_grad(w: np.ndarray, b: float, ex: TrainingExample, kind: str) -> Tuple[float, np.ndarray, float]:
    """Loss of one example and its (sub)gradient in the weights and bias."""
    s = ex.X @ w + b
    if kind == "l2":
        r = s + ex.margins  # target is -margin
        n = len(r)
        return float(r @ r / n), 2.0 * (ex.X.T @ r) / n, float(2.0 * r.sum() / n)
    e = s + ex.margins - (ex.x_gt @ w + b)
    if kind == "structure_sum":
        active = e > 0
        g = (ex.X[active] - ex.x_gt).sum(axis=0)
        return float(e[active].sum()), g, 0.0
    if kind == "structure_max":
        j = int(np.argmax(e))
        if e[j] <= 0:
            return 0.0, np.zeros_like(w), 0.0
        return float(e[j]), ex.X[j] - ex.x_gt, 0.0
    raise ValueError(f"unknown loss kind {kind!r}")


def dataset_loss(w: np.ndarray, b: float, examples: Sequence[TrainingExample], kind: str) -> Tuple[float, np.ndarray, float]:
    """Mean loss over ``examples`` with its gradient."""
    tot, gw, gb = 0.0, np.zeros(N_FEATURES), 0.0
    for ex in examples:
        l, g, gbi = example_loss_grad(w, b, ex, kind)
        tot += l
        gw += g
        gb += gbi
    n = len(examples)
    return tot / n, gw / n, gb / n


@dataclass(frozen=True)
class TrainConfig:
    loss_kind: str = "structure_sum"
    learning_rate: float = 0.05
    epochs: int = 60
    batch_size: int = 16
    seed: int = 0
    floor_only_area: bool = True
    weight_decay: float = 0.1

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def train(dataset, cfg: TrainConfig = TrainConfig(), history: Optional[list] = None) -> ScorerParams:
    """Fit scorer weights by mini-batch subgradient descent from zero.

    ``dataset`` holds either :class:`TrainingExample` objects or
    ``(maps, gt, candidates)`` triples.  Per-epoch mean losses are appended
    to ``history`` when given.
    """
    examples = [
        d if isinstance(d, TrainingExample) else prepare_example(d[0], d[1], d[2], cfg.floor_only_area)
        for d in dataset
    ]
    if not examples:
        raise EmptyDataset("no training examples")
    rng = np.random.default_rng(cfg.seed)
    w, b = np.zeros(N_FEATURES), 0.0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [examples[i] for i in order[start:start + cfg.batch_size]]
            loss, gw, gb = dataset_loss(w, b, batch, cfg.loss_kind)
            if not (math.isfinite(loss) and np.all(np.isfinite(gw))):
                raise NonFiniteLoss(f"loss diverged in epoch {epoch}")
            epoch_loss += loss * len(batch)
            w = w - cfg.learning_rate * (gw + cfg.weight_decay * w)
            b = b - cfg.learning_rate * gb
        if history is not None:
            history.append(epoch_loss / len(examples))
    return ScorerParams(w, b)
