from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import box_room, ww
from roomlayout.errors import FormatError, RangeError
from roomlayout.featuremaps import (
    FeatureMaps,
    NoiseConfig,
    dumps,
    load_maps,
    loads,
    predict_wall_count,
    render_oracle,
    render_photo,
    save_maps,
)
from roomlayout.layout import CEILING, FLOOR, WALL, Layout, label_map
from roomlayout.synthetic import displace_ridges, random_layout


def random_bundle(rng, h=16, w=20):
    corner = rng.uniform(0, 1, (2, h, w))
    boundary = rng.uniform(0, 1, (4, h, w))
    seg = rng.dirichlet(np.ones(3), size=(h, w)).transpose(2, 0, 1)
    return FeatureMaps(corner, boundary, seg, rng.uniform(0, 8))


def test_noiseless_seg_is_one_hot_surface_masks():
    lay = box_room()
    maps = render_oracle(lay)
    lab = label_map(lay)
    for ch, cls in enumerate((WALL, FLOOR, CEILING)):
        assert np.array_equal(maps.seg[ch], (lab == cls).astype(np.float32))
    assert maps.complexity == lay.n_walls == 3


def test_blurred_ridge_peaks_on_the_line():
    lay = Layout((ww(40.0, 100, 40.0, 0, False, False),), False, False, 100, 100)
    maps = render_oracle(lay, NoiseConfig(blur_sigma=2.0))
    plane = maps.boundary[0]
    for row in plane[10:90]:
        # the ridge top may be a flat plateau; its location is the plateau middle
        top = np.flatnonzero(row >= row.max() - 1e-6) + 0.5
        assert abs(0.5 * (top[0] + top[-1]) - 40.0) <= 1.0
    assert maps.boundary[0].max() == pytest.approx(1.0, abs=1e-6)


def test_boundary_channels_complement():
    maps = render_oracle(random_layout(np.random.default_rng(5), 4), NoiseConfig(1.0, 0.05, 2, 0.05, seed=3))
    np.testing.assert_allclose(maps.boundary[3], 1 - maps.boundary[:3].max(axis=0), atol=1e-6)
    maps.validate()


def test_corner_bumps_at_visible_corners():
    maps = render_oracle(box_room())
    # wwf corners at (30, 80), (70, 80): the bump peaks at the pixel whose center is nearest
    r, c = np.unravel_index(np.argmax(maps.corner[0][:, :50]), (100, 50))
    assert abs(c + 0.5 - 30) <= 0.5 and abs(r + 0.5 - 80) <= 0.5


def test_oracle_is_deterministic():
    lay = random_layout(np.random.default_rng(9), 5)
    cfg = NoiseConfig(2.0, 0.1, 3, 0.05, seed=42)
    a, b = render_oracle(lay, cfg), render_oracle(lay, cfg)
    assert dumps(a) == dumps(b)


def test_occluder_zeroes_boundaries_not_segmentation():
    lay = random_layout(np.random.default_rng(2), 3)
    clean = render_oracle(lay)
    occ = render_oracle(lay, NoiseConfig(occlusion_boxes=3, occlusion_max_frac=0.2, seed=1))
    assert np.array_equal(clean.seg, occ.seg)
    assert occ.boundary[:3].sum() < clean.boundary[:3].sum()


@pytest.mark.parametrize("c,expected", [(3.0, 3), (0.2, 1), (4.6, 5), (2.5, 3), (0.0, 1)])
def test_predict_wall_count(c, expected):
    assert predict_wall_count(c) == expected


def test_save_load_round_trip(tmp_path, rng):
    maps = random_bundle(rng)
    save_maps(maps, tmp_path / "m.rsnm")
    back = load_maps(tmp_path / "m.rsnm")
    for name in ("corner", "boundary", "seg"):
        assert getattr(back, name).tobytes() == getattr(maps, name).tobytes()
    assert back.complexity == maps.complexity


def test_container_layout_is_documented():
    maps = random_bundle(np.random.default_rng(0), 3, 4)
    data = dumps(maps)
    assert data[:4] == b"RSNM"
    assert struct.unpack_from("<HII", data, 4) == (1, 4, 3)
    assert data[14:16] == bytes([0, 2])
    assert len(data) == 14 + 3 * 2 + 4 * 3 * 4 * (2 + 4 + 3) + 4


def test_corrupted_magic_rejected(rng):
    data = bytearray(dumps(random_bundle(rng)))
    data[0] = ord("X")
    with pytest.raises(FormatError):
        loads(bytes(data))


def test_wrong_channel_count_rejected(rng):
    data = bytearray(dumps(random_bundle(rng)))
    h, w = 16, 20
    off = 14 + 2 + 4 * 2 * h * w  # second block header
    assert data[off] == 1
    data[off + 1] = 5
    with pytest.raises(FormatError):
        loads(bytes(data))


def test_truncated_rejected(rng):
    data = dumps(random_bundle(rng))
    with pytest.raises(FormatError):
        loads(data[:-3])


def test_out_of_range_values_rejected(rng):
    maps = random_bundle(rng)
    maps.boundary[0, 0, 0] = 1.5
    with pytest.raises(RangeError):
        maps.validate()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 12))
def test_round_trip_is_bitwise(seed, h, w):
    maps = random_bundle(np.random.default_rng(seed), h, w)
    back = loads(dumps(maps))
    assert dumps(back) == dumps(maps)


def test_photo_neighbouring_surfaces_differ():
    lay = box_room()
    img = render_photo(lay)
    assert img[50, 10] != img[50, 50] != img[50, 90]
    assert img[95, 50] != img[50, 50] and img[5, 50] != img[50, 50]


def test_displace_ridges_moves_ww_and_corners_only():
    maps = render_oracle(box_room())
    d = displace_ridges(maps, 4)
    assert np.array_equal(d.boundary[0][:, 4:], maps.boundary[0][:, :-4])
    assert np.array_equal(d.boundary[1], maps.boundary[1])
    assert np.array_equal(d.corner[:, :, 4:], maps.corner[:, :, :-4])
    assert np.array_equal(d.seg, maps.seg)
