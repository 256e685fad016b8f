from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import P, box_room
from roomlayout.featuremaps import render_oracle, render_photo
from roomlayout.geometry import LineSegment, fill_polygon, orientation_diff, point_segment_distance
from roomlayout.layout import Layout, WWBoundary, validate
from roomlayout.proposal import ALIGNED_FINAL, ALIGNED_INTERMEDIATE, propose
from roomlayout.refine import CueSet, RefineConfig, align_candidates, align_layout, cues_from_maps, extract_cues
from roomlayout.synthetic import random_layout


def vertical(x, y0=5, y1=95):
    return LineSegment(P(x, y0), P(x, y1))


def corner_moves(a, b):
    return [max(math.dist(p.floor_corner, q.floor_corner), math.dist(p.ceil_corner, q.ceil_corner))
            for p, q in zip(a.boundaries, b.boundaries)]


def test_quadrilateral_gives_four_cues():
    quad = [(20.3, 25.2), (80.4, 18.7), (85.1, 80.6), (15.2, 75.3)]
    img = fill_polygon(quad, 100, 100).astype(float)
    cues = extract_cues(img).segments
    edges = [LineSegment(P(*quad[i]), P(*quad[(i + 1) % 4])) for i in range(4)]
    assert len(cues) == 4
    for e in edges:
        near = [c for c in cues if orientation_diff(c, e) < math.radians(5)
                and point_segment_distance(np.array([c.midpoint]), [e])[0] <= 2.0]
        assert len(near) == 1


def test_constant_image_has_no_cues():
    assert extract_cues(np.full((60, 80), 0.4)).segments == []


def test_step_edge_is_one_cue():
    img = np.zeros((80, 80))
    img[:, 40:] = 1.0
    cues = extract_cues(img).segments
    assert len(cues) == 1
    c = cues[0]
    assert abs(c.midpoint.x - 40) <= 1.0 and c.length >= 60


def test_three_pixel_offset_is_recovered():
    lay = box_room(xs=(50,))
    out = align_layout(lay, CueSet([vertical(53)]))
    assert len(out) == 1
    moved = out[0].boundaries[1]
    assert moved.floor_corner.x == pytest.approx(53, abs=1e-6)
    assert moved.ceil_corner.x == pytest.approx(53, abs=1e-6)
    assert max(corner_moves(lay, out[0])) <= 5.0


def test_two_matches_give_three_variants():
    lay = box_room(xs=(30, 70))
    out = align_layout(lay, CueSet([vertical(33), vertical(72)]))
    assert len(out) == 3
    xs = [tuple(round(b.floor_corner.x, 6) for b in l.boundaries[1:3]) for l in out]
    assert xs == [(33, 70), (30, 72), (33, 72)]


def test_far_or_oblique_cues_are_ignored():
    lay = box_room(xs=(50,))
    assert align_layout(lay, CueSet([vertical(80)])) == []
    tilted = LineSegment(P(40, 5), P(60, 95))  # about 12.5 degrees off vertical
    assert align_layout(lay, CueSet([tilted])) == []


def test_floor_line_snaps_to_horizontal_cue():
    lay = box_room(xs=(30, 70), yf=80)
    cue = LineSegment(P(25, 83), P(75, 83))
    out = align_layout(lay, CueSet([cue]))
    assert len(out) == 1
    b1, b2 = out[0].boundaries[1:3]
    assert b1.floor_corner.y == pytest.approx(83) and b2.floor_corner.y == pytest.approx(83)
    assert b1.floor_corner.x == pytest.approx(30) and b2.floor_corner.x == pytest.approx(70)


def jittered(layout, rng, amp=3.0):
    bs = []
    for b in layout.boundaries:
        if layout.edge_side(b) is None:
            d = rng.uniform(-amp, amp, 4)
            b = WWBoundary(P(b.floor_corner.x + d[0], b.floor_corner.y + d[1]),
                           P(b.ceil_corner.x + d[2], b.ceil_corner.y + d[3]), b.floor_visible, b.ceil_visible)
        bs.append(b)
    return Layout(tuple(bs), layout.has_ceiling, layout.has_floor, layout.image_width, layout.image_height)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_alignment_is_idempotent(seed, n):
    rng = np.random.default_rng(seed)
    gt = random_layout(rng, n)
    cues = extract_cues(render_photo(gt))
    lay = jittered(gt, rng)
    if validate(lay):
        return
    for v in align_layout(lay, cues)[-1:]:
        for again in align_layout(v, cues):
            assert max(corner_moves(v, again)) <= 0.5


def test_align_candidates_keeps_originals_first():
    gt = random_layout(np.random.default_rng(5), 3)
    cands = propose(render_oracle(gt))
    out = align_candidates(cands, cues_from_maps(render_oracle(gt)))
    assert out.cue_source == "boundary-map"
    assert len(set(out.layouts)) == len(out)
    orig = [l for l, t in zip(out.layouts, out.provenance) if t not in (ALIGNED_FINAL, ALIGNED_INTERMEDIATE)]
    assert orig == list(cands.layouts)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.floats(-6, 6))
def test_aligned_layouts_are_valid_and_bounded(seed, n, shift):
    gt = random_layout(np.random.default_rng(seed), n)
    cues = CueSet([LineSegment(P(s.a.x + shift, s.a.y), P(s.b.x + shift, s.b.y))
                   for s in extract_cues(render_photo(gt)).segments])
    cfg = RefineConfig()
    for v in align_layout(gt, cues, cfg):
        assert validate(v) == []
        assert max(corner_moves(gt, v)) <= 2 * cfg.d_align + 1e-9
