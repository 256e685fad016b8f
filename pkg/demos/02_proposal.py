"""
From feature maps to candidate layouts
======================================

Without a trained network we render the maps it would produce straight from a
known room (the "oracle").  Candidates are built from ridges in the wall-wall
boundary map and from paired floor/ceiling corner peaks, then every subset of
the merged lines up to the predicted wall count becomes a layout.
"""
from __future__ import annotations

import numpy as np

from roomlayout import NoiseConfig, e_pixel, propose, random_layout, render_oracle
from roomlayout.proposal import ww_candidates

rng = np.random.default_rng(3)
gt = random_layout(rng, 4)
print("true room:", gt.n_walls, "walls")

for name, noise in (("clean", NoiseConfig()), ("blurred + occluded", NoiseConfig(blur_sigma=2.0, occlusion_boxes=2, occlusion_max_frac=0.05, seed=1))):
    maps = render_oracle(gt, noise)
    lines, vp = ww_candidates(maps)
    cands = propose(maps, image_id="demo")
    errs = np.array([e_pixel(l, gt) for l in cands.layouts])
    print(f"{name}: {len(lines)} wall-wall lines, vertical VP valid={vp.valid}, "
          f"{len(cands)} candidates, best e_pixel {errs.min():.4f}")

# The wall-count cap trims the search: with cap 2 only layouts with at most
# one interior boundary are enumerated.
capped = propose(render_oracle(gt), cap=2)
print("cap 2:", len(capped), "candidates, max walls", max(l.n_walls for l in capped.layouts))
