"""
Learning to rank candidates
===========================

Each candidate is described by 16 features measuring how well it agrees with
the maps.  A linear scorer is trained so the ground truth outscores every
candidate by at least the margin between them (the structured hinge), and
compared with plain L2 regression onto the negative margin.
"""
from __future__ import annotations

import numpy as np

from roomlayout import PipelineConfig, TrainConfig, candidates, e_pixel, random_layout, render_oracle, topk_table, train
from roomlayout.scoring import FEATURE_NAMES, prepare_example

cfg = PipelineConfig().with_cues("none")


def scenes(seed, n):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        gt = random_layout(rng, int(rng.integers(1, 7)))
        maps = render_oracle(gt)
        cs = candidates(maps, cfg)
        out.append((prepare_example(maps, gt, cs), np.array([e_pixel(l, gt) for l in cs.layouts])))
    return out


train_set, test_set = scenes(0, 60), scenes(1, 30)
for kind in ("structure_sum", "l2"):
    params = train([ex for ex, _ in train_set], TrainConfig(loss_kind=kind))
    ranked = [errs[np.argsort(-(ex.X @ params.weights + params.bias), kind="stable")] for ex, errs in test_set]
    table = topk_table(ranked, ks=(1, 5, 20))
    print(kind, {k: round(v, 4) for k, v in table.items()})

top = np.argsort(-np.abs(params.weights))[:4]
print("largest L2 weights:", [(FEATURE_NAMES[i], round(float(params.weights[i]), 2)) for i in top])
