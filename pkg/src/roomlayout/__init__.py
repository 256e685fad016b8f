"""Room layout estimation from layout feature maps.

Candidate layouts are proposed from corner, boundary and segmentation maps,
optionally snapped onto straight image edges, and ranked by a scorer trained
with a structured max-margin objective.
"""
from __future__ import annotations

from .config import PipelineConfig, load_config
from .errors import *  # noqa: F401,F403
from .evaluation import MetricReport, complexity_sweep, e_corner, e_pixel, topk_table
from .featuremaps import FeatureMaps, NoiseConfig, load_maps, predict_wall_count, render_oracle, render_photo, save_maps
from .geometry import LineSegment, Point, PolygonMask, fit_segment, rasterize_polygon
from .layout import Layout, WWBoundary, check, label_map, render_boundary_image, surface_masks, validate
from .pipeline import candidates, infer
from .proposal import CandidateSet, ProposalConfig, propose
from .refine import CueSet, RefineConfig, align_candidates, align_layout, extract_cues
from .scoring import (
    MarginBreakdown,
    ScorerParams,
    TrainConfig,
    d_area,
    d_line,
    joint_features,
    margin,
    score,
    select_best,
    structure_cost,
    train,
)
from .synthetic import random_layout

__version__ = "0.1.0"
