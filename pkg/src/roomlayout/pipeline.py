"""Maps in, one layout out: proposal, optional cue alignment, scoring."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import PipelineConfig
from .featuremaps import FeatureMaps, predict_wall_count
from .proposal import CandidateSet, propose
from .refine import align_candidates, cues_from_maps, extract_cues
from .scoring import ScorerParams, argmax_first, score_all


def effective_cap(maps: FeatureMaps, cfg: PipelineConfig) -> int:
    cap = predict_wall_count(maps.complexity)
    if cfg.run.max_walls:
        cap = min(cap, cfg.run.max_walls)
    return cap


def candidates(maps: FeatureMaps, cfg: PipelineConfig = PipelineConfig(), photo: Optional[np.ndarray] = None, image_id: str = "") -> CandidateSet:
    """Proposed layouts for one image, aligned to line cues when available."""
    cs = propose(maps, effective_cap(maps, cfg), cfg.proposal, image_id)
    mode = cfg.run.cues
    if mode == "photo" and photo is not None:
        cs = align_candidates(cs, extract_cues(photo, cfg.refine, source="photo"), cfg.refine)
    elif mode == "maps":
        cs = align_candidates(cs, cues_from_maps(maps, cfg.refine), cfg.refine)
    return cs


@dataclass
class InferResult:
    layout: object
    candidates: CandidateSet
    scores: np.ndarray
    index: int


def infer(maps: FeatureMaps, params: ScorerParams, cfg: PipelineConfig = PipelineConfig(), photo: Optional[np.ndarray] = None, image_id: str = "") -> InferResult:
    cs = candidates(maps, cfg, photo, image_id)
    scores = score_all(cs.layouts, maps, params)
    j = argmax_first(scores)
    return InferResult(cs.layouts[j], cs, scores, j)
