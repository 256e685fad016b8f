from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import Point as SPoint
from shapely.geometry import Polygon

from conftest import P, band_floor, box_room, ww
from roomlayout.errors import InvalidLayout, MissingSurface
from roomlayout.geometry import LineSegment, bresenham
from roomlayout.layout import (
    FLOOR,
    Layout,
    check,
    floor_polygon,
    label_map,
    render_boundary_image,
    single_wall,
    surface_masks,
    validate,
    wall_index_map,
    wc_segments,
    wf_segments,
    ww_segments,
)
from roomlayout.synthetic import random_layout


def kinds(layout):
    return [v.kind for v in validate(layout)]


def test_valid_box_room():
    assert validate(box_room()) == []
    assert box_room().n_walls == 3


def test_equal_floor_x_is_ordering_violation():
    bs = (ww(0, 90, 0, 10, False, False), ww(40, 80, 40, 20), ww(40, 82, 45, 20), ww(100, 90, 100, 10, False, False))
    assert "OrderingViolation" in kinds(Layout(bs, True, True, 100, 100))


def test_ceiling_below_floor_is_inverted():
    bs = (ww(0, 90, 0, 10, False, False), ww(40, 30, 40, 70), ww(100, 90, 100, 10, False, False))
    assert kinds(Layout(bs, True, True, 100, 100)) == ["InvertedBoundary"]
    with pytest.raises(InvalidLayout):
        check(Layout(bs, True, True, 100, 100))


def test_out_of_image_corner():
    bs = (ww(0, 90, 0, 10, False, False), ww(40, 101, 40, 20), ww(100, 90, 100, 10, False, False))
    assert "OutOfImage" in kinds(Layout(bs, True, True, 100, 100))


def test_wf_segments_interior_pair():
    # two visible boundaries, no edge closures: the chain is closed horizontally to both sides
    lay = Layout((ww(30, 80, 30, 20), ww(70, 85, 70, 20)), True, True, 100, 100)
    segs = wf_segments(lay)
    assert [(tuple(s.a), tuple(s.b)) for s in segs] == [((0, 80), (30, 80)), ((30, 80), (70, 85)), ((70, 85), (100, 85))]


def test_wf_single_boundary_has_only_edge_connections():
    lay = Layout((ww(50, 80, 50, 20),), True, True, 100, 100)
    segs = wf_segments(lay)
    assert len(segs) == 2
    assert {s.a.x for s in segs} | {s.b.x for s in segs} == {0.0, 50.0, 100.0}


def test_missing_surface():
    with pytest.raises(MissingSurface):
        wf_segments(box_room(floor=False))
    with pytest.raises(MissingSurface):
        wc_segments(box_room(ceiling=False))


def test_boundary_image_no_ceiling_channel_empty():
    img = render_boundary_image(box_room(ceiling=False))
    assert img.channels[2].max() == 0
    assert img.channels[0].max() == 1


def test_boundary_image_vertical_ww_equals_bresenham():
    # a single interior wall line through the full height (no floor, no ceiling)
    lay = Layout((ww(50, 100, 50, 0, False, False),), False, False, 100, 100)
    img = render_boundary_image(lay, stroke_px=1)
    ref = np.zeros((100, 100), bool)
    rr, cc = bresenham(LineSegment(P(50, 0), P(50, 100)), 100, 100)
    ref[rr, cc] = True
    assert np.array_equal(img.channels[0] > 0, ref)


def test_single_wall_mask_covers_everything():
    sm = surface_masks(single_wall(64, 48))
    assert len(sm.walls) == 1
    assert sm.walls[0].count() == 64 * 48
    assert sm.floor.count() == sm.ceiling.count() == 0


def test_symmetric_room_has_symmetric_floor():
    # off-lattice corners: no pixel center lies exactly on an edge, where the
    # half-open fill rule would break the tie one way
    lay = box_room(xs=(30, 70), yf=80.2, edge_f=90.3)
    f = surface_masks(lay).floor.bits
    assert np.array_equal(f, f[:, ::-1])


def test_label_map_matches_shapely_oracle():
    lay = box_room(xs=(25, 60), yf=78, yc=22)
    poly = Polygon(floor_polygon(lay))
    labels = label_map(lay)
    for r in range(0, 100, 3):
        for c in range(0, 100, 3):
            inside = poly.contains(SPoint(c + 0.5, r + 0.5))
            assert (labels[r, c] == FLOOR) == inside


def test_wall_index_counts_from_left():
    idx = wall_index_map(box_room(xs=(30, 70)))
    assert idx[50, 10] == 0 and idx[50, 50] == 1 and idx[50, 90] == 2
    assert idx[95, 50] == -1


def test_band_floor_counts():
    lab = label_map(band_floor(100, 60))
    assert np.count_nonzero(lab == FLOOR) == 40 * 100


def test_json_round_trip():
    lay = box_room()
    assert Layout.from_json(lay.to_json()) == lay


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_random_layouts_partition_the_image(seed, n):
    lay = random_layout(np.random.default_rng(seed), n)
    assert validate(lay) == []
    sm = surface_masks(lay)
    total = sm.floor.count() + sm.ceiling.count() + sum(m.count() for m in sm.walls)
    assert total == lay.image_width * lay.image_height
    union = sm.floor.bits.astype(int) + sm.ceiling.bits + sum(m.bits.astype(int) for m in sm.walls)
    assert union.max() == 1
    assert lay.n_walls == n
    assert len(ww_segments(lay)) == n - 1
