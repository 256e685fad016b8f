from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import P, band_floor, box_room, ww
from roomlayout.errors import DimensionMismatch, EmptyCandidates, EmptyDataset, FormatError, LengthMismatch
from roomlayout.featuremaps import render_oracle
from roomlayout.geometry import LineSegment, sample_polyline
from roomlayout.layout import Layout, boundary_segments, single_wall
from roomlayout.proposal import propose
from roomlayout.scoring import (
    FEATURE_NAMES,
    N_FEATURES,
    ScorerParams,
    TrainConfig,
    TrainingExample,
    _line_terms,
    argmax_first,
    d_area,
    d_line,
    dataset_loss,
    joint_features,
    margin,
    prepare_example,
    rank,
    score,
    score_all,
    select_best,
    structure_cost,
    train,
)
from roomlayout.synthetic import random_layout

F = {name: i for i, name in enumerate(FEATURE_NAMES)}


def brute_chamfer_term(a, b, diag, k=64):
    pa, _ = sample_polyline(a, k)
    pb, _ = sample_polyline(b, k)
    d = np.hypot(*(pa[:, None, :] - pb[None, :, :]).transpose(2, 0, 1))
    return (0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean()) / diag) ** 2


def moved_corner(dx):
    lay = box_room()
    bs = list(lay.boundaries)
    b = bs[1]
    bs[1] = type(b)(P(b.floor_corner.x + dx, b.floor_corner.y), b.ceil_corner, True, True)
    return Layout(tuple(bs), True, True, 100, 100)


def test_d_line_identity():
    lay = random_layout(np.random.default_rng(0), 4)
    assert d_line(lay, lay) == pytest.approx(0, abs=1e-12)


def test_d_line_pixel_term_matches_brute_chamfer():
    gt, lay = box_room(), moved_corner(10)
    sa, sb = boundary_segments(lay), boundary_segments(gt)
    for c in ("ww", "wf"):
        pixel, _ = _line_terms(sa[c], sb[c], gt.diagonal, 64)
        assert pixel > 0
        assert pixel == pytest.approx(brute_chamfer_term(sa[c], sb[c], gt.diagonal), rel=1e-12)
    # ceiling boundaries are untouched
    assert _line_terms(sa["wc"], sb["wc"], gt.diagonal, 64) == pytest.approx((0, 0), abs=1e-12)


def test_perpendicular_boundaries_have_unit_angular_term():
    v = [LineSegment(P(50, 20), P(50, 80))]
    h = [LineSegment(P(20, 50), P(80, 50))]
    _, angular = _line_terms(v, h, 141.42, 64)
    assert angular == pytest.approx(1.0, abs=1e-12)


def test_d_area_examples():
    gt = band_floor(100, 60)  # floor is the bottom 40 rows
    assert d_area(gt, gt) == 0
    assert d_area(band_floor(100, 80), gt) == 1.0
    assert d_area(single_wall(100, 100), gt) == 2.0
    # no floor in either layout
    assert d_area(single_wall(100, 100), single_wall(100, 100)) == 0


def test_d_area_rejects_size_mismatch():
    with pytest.raises(DimensionMismatch):
        d_area(single_wall(100, 100), single_wall(90, 100))


def test_disjoint_margin_composes():
    gt, lay = band_floor(100, 60), single_wall(100, 100)
    m = margin(lay, gt)
    assert m.d_area == 2.0
    assert m.total == pytest.approx(d_line(lay, gt) + 2.0)


def test_margin_is_monotone_in_corner_shift():
    gt = box_room()
    assert margin(moved_corner(20), gt).total >= margin(moved_corner(10), gt).total > 0


def test_structure_cost_examples():
    assert structure_cost([3.0], 5.0, [1.0]) == 0
    for kind in ("structure_sum", "structure_max"):
        assert structure_cost([5.0], 5.0, [2.0], kind) == 2.0
    assert structure_cost([1.0, 2.0], 5.0, [0.5, 1.0]) == 0
    with pytest.raises(LengthMismatch):
        structure_cost([1.0, 2.0], 5.0, [0.5])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 30))
def test_c1_never_exceeds_c2(seed, n):
    rng = np.random.default_rng(seed)
    s, m = rng.normal(size=n), rng.uniform(0, 2, n)
    g = rng.normal()
    c1 = structure_cost(s, g, m, "structure_max")
    c2 = structure_cost(s, g, m, "structure_sum")
    assert 0 <= c1 <= c2 + 1e-12
    assert (c2 == 0) == bool(np.all(g >= s + m))


def random_examples(rng, n_ex=4, n_cand=12):
    return [
        TrainingExample(rng.normal(size=(n_cand, N_FEATURES)), rng.normal(size=N_FEATURES), rng.uniform(0, 2, n_cand))
        for _ in range(n_ex)
    ]


@pytest.mark.parametrize("kind", ["structure_sum", "l2"])
def test_gradient_matches_finite_differences(kind, rng):
    exs = random_examples(rng)
    w, b = rng.normal(size=N_FEATURES) * 0.3, 0.2
    _, gw, gb = dataset_loss(w, b, exs, kind)
    # random continuous data keeps every hinge term away from its kink at this step
    h = 1e-6
    num = np.zeros(N_FEATURES)
    for i in range(N_FEATURES):
        e = np.zeros(N_FEATURES)
        e[i] = h
        num[i] = (dataset_loss(w + e, b, exs, kind)[0] - dataset_loss(w - e, b, exs, kind)[0]) / (2 * h)
    np.testing.assert_allclose(gw, num, rtol=1e-4, atol=1e-6)
    num_b = (dataset_loss(w, b + h, exs, kind)[0] - dataset_loss(w, b - h, exs, kind)[0]) / (2 * h)
    assert gb == pytest.approx(num_b, rel=1e-4, abs=1e-6)


def test_score_examples():
    lay = random_layout(np.random.default_rng(3), 3)
    maps = render_oracle(lay)
    assert score(lay, maps, ScorerParams.zeros()) == 0
    one = np.zeros(N_FEATURES)
    one[F["const"]] = 1
    assert score(lay, maps, ScorerParams(one)) == 1
    rng = np.random.default_rng(4)
    w1, w2 = rng.normal(size=N_FEATURES), rng.normal(size=N_FEATURES)
    s12 = score(lay, maps, ScorerParams(w1 + w2, 0.5))
    assert s12 == pytest.approx(score(lay, maps, ScorerParams(w1, 0.5)) + score(lay, maps, ScorerParams(w2, 0.0)))


def test_features_of_ground_truth_on_noiseless_maps():
    gt = random_layout(np.random.default_rng(7), 4)
    f = joint_features(gt, render_oracle(gt))
    assert f.shape == (N_FEATURES,)
    for name in ("ridge_ww", "ridge_wf", "ridge_wc", "seg_floor", "seg_wall", "ridge_coverage"):
        assert f[F[name]] > 0.95, name
    assert f[F["non_boundary"]] < 0.05
    assert f[F["wall_count_gap"]] == 0
    assert f[F["const"]] == 1


def test_wall_through_floor_lowers_wall_agreement():
    gt = box_room(xs=(30, 70))
    maps = render_oracle(gt)
    # an extra wall boundary, its floor corner pushed deep into the floor
    bs = list(gt.boundaries)
    bs.insert(2, ww(50, 98, 50, 20))
    bad = Layout(tuple(bs), True, True, 100, 100)
    assert joint_features(bad, maps)[F["seg_wall"]] < joint_features(gt, maps)[F["seg_wall"]]


def test_feature_size_mismatch():
    with pytest.raises(DimensionMismatch):
        joint_features(single_wall(64, 64), render_oracle(single_wall(100, 100)))


def test_selection_examples():
    assert argmax_first([1.0, 3.0, 2.0]) == 1
    assert argmax_first(np.array([1.0, 3.0, 2.0]) + 7.5) == 1
    assert argmax_first([2.0, 2.0, 1.0]) == 0
    with pytest.raises(EmptyCandidates):
        argmax_first([])
    lay = single_wall(50, 50)
    maps = render_oracle(lay)
    assert select_best([lay], maps, ScorerParams.zeros()) == lay
    with pytest.raises(EmptyCandidates):
        select_best([], maps, ScorerParams.zeros())


def test_rank_orders_by_score():
    gt = random_layout(np.random.default_rng(11), 4)
    maps = render_oracle(gt)
    cands = propose(maps)
    params = ScorerParams(np.random.default_rng(0).normal(size=N_FEATURES))
    s = score_all(cands.layouts, maps, params)
    order = rank(cands, maps, params)
    assert np.all(np.diff(s[order]) <= 0)
    assert cands.layouts[order[0]] == select_best(cands, maps, params)


def test_params_file_round_trip(tmp_path, rng):
    p = ScorerParams(rng.normal(size=N_FEATURES), -0.25)
    p.save(tmp_path / "s.txt")
    q = ScorerParams.load(tmp_path / "s.txt")
    assert q.weights.tobytes() == p.weights.tobytes() and q.bias == p.bias


def test_params_version_mismatch_rejected(rng):
    text = ScorerParams(rng.normal(size=N_FEATURES)).dumps().replace("jf16-v1", "jf16-v0")
    with pytest.raises(FormatError):
        ScorerParams.loads(text)
    with pytest.raises(FormatError):
        ScorerParams.loads("version jf16-v1\nfeatures 16\nbias 0\n")


def test_training_ranks_dominant_ground_truth_first():
    rng = np.random.default_rng(5)
    exs = []
    for _ in range(40):
        X = rng.uniform(0, 1, (15, N_FEATURES))
        X[:, :3] = rng.uniform(0.0, 0.6, (15, 3))
        X[:, F["const"]] = 1
        x_gt = rng.uniform(0, 1, N_FEATURES)
        x_gt[:3] = rng.uniform(0.8, 1.0, 3)
        x_gt[F["const"]] = 1
        exs.append(TrainingExample(X, x_gt, 1.0 - X[:, :3].mean(axis=1)))
    p = train(exs, TrainConfig(epochs=80))
    first = [x.x_gt @ p.weights > (x.X @ p.weights).max() for x in exs]
    assert np.mean(first) >= 0.9


def test_tiny_learning_rate_leaves_index_ties():
    gt = random_layout(np.random.default_rng(2), 3)
    maps = render_oracle(gt)
    cands = propose(maps)
    p = train([prepare_example(maps, gt, cands)], TrainConfig(learning_rate=1e-300, epochs=1))
    scores = score_all(cands.layouts, maps, p)
    assert np.all(np.abs(scores) < 1e-290)
    assert select_best(cands, maps, ScorerParams(np.round(p.weights, 12), round(p.bias, 12))) == cands.layouts[0]


@pytest.mark.parametrize("kind", ["structure_sum", "structure_max", "l2"])
def test_training_is_deterministic(kind, rng):
    exs = random_examples(rng, 6, 8)
    cfg = TrainConfig(loss_kind=kind, epochs=5, batch_size=4, seed=9, learning_rate=0.01)
    a, b = train(exs, cfg), train(exs, cfg)
    assert a.dumps() == b.dumps()


def test_training_history_and_errors(rng):
    hist = []
    train(random_examples(rng), TrainConfig(epochs=3), history=hist)
    assert len(hist) == 3 and all(np.isfinite(hist))
    with pytest.raises(EmptyDataset):
        train([])
    with pytest.raises(ValueError):
        TrainConfig(loss_kind="hinge")
