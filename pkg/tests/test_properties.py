from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from roomlayout.config import PipelineConfig
from roomlayout.featuremaps import NoiseConfig, render_oracle
from roomlayout.layout import validate
from roomlayout.pipeline import candidates, effective_cap
from roomlayout.scoring import margin
from roomlayout.synthetic import random_layout

seeds = st.integers(0, 2**32 - 1)
walls = st.integers(1, 6)


@settings(max_examples=60, deadline=None)
@given(seeds, walls, walls)
def test_margin_non_negative(seed, n1, n2):
    rng = np.random.default_rng(seed)
    a, b = random_layout(rng, n1), random_layout(rng, n2)
    m = margin(a, b)
    assert m.d_line >= 0 and m.d_area >= 0 and m.total >= 0


@settings(max_examples=40, deadline=None)
@given(seeds, walls, st.booleans())
def test_margin_of_identical_layouts_is_zero(seed, n, floor_only):
    lay = random_layout(np.random.default_rng(seed), n)
    assert margin(lay, lay, floor_only).total <= 1e-6


@settings(max_examples=25, deadline=None)
@given(seeds, walls, st.integers(1, 6), st.sampled_from(["none", "maps"]))
def test_candidates_respect_the_wall_cap(seed, n, cap, cues):
    gt = random_layout(np.random.default_rng(seed), n)
    maps = render_oracle(gt, NoiseConfig(blur_sigma=1.0, seed=seed % 1000))
    cfg = PipelineConfig().with_cap(cap).with_cues(cues)
    cs = candidates(maps, cfg)
    limit = effective_cap(maps, cfg)
    assert limit <= cap
    assert len(cs) >= 1
    for lay in cs.layouts:
        assert lay.n_walls <= limit
        assert validate(lay) == []
