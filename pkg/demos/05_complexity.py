"""
How much does the wall-count cap matter?
========================================

Rooms with five walls cannot be represented when the pipeline is capped at
three, so their error rises; three-wall rooms are unaffected by raising the
cap.  This mirrors the complexity ablation at a small synthetic scale.
"""
from __future__ import annotations

import numpy as np

from roomlayout import PipelineConfig, TrainConfig, candidates, complexity_sweep, random_layout, render_oracle, train
from roomlayout.scoring import prepare_example

cfg = PipelineConfig().with_cues("none")
rng = np.random.default_rng(0)

examples = []
for _ in range(60):
    gt = random_layout(rng, int(rng.integers(1, 7)))
    maps = render_oracle(gt)
    examples.append(prepare_example(maps, gt, candidates(maps, cfg)))
params = train(examples, TrainConfig())

for n in (5, 3):
    rooms = [random_layout(rng, n) for _ in range(20)]
    res = complexity_sweep([(render_oracle(g), g) for g in rooms], [3, 6], params, cfg)
    for cap, (ep, ec) in res.items():
        print(f"{n}-wall rooms, cap {cap}: e_pixel {ep:.4f}  e_corner {ec:.4f}")
