"""
Snapping candidates onto image edges
====================================

Here the boundary map is deliberately wrong: every wall-wall ridge is shifted
4 px to the right.  The photo is clean, so straight edges extracted from it
pull the proposed boundaries back into place.
"""
from __future__ import annotations

import numpy as np

from roomlayout import align_candidates, e_corner, extract_cues, propose, random_layout, render_oracle, render_photo
from roomlayout.synthetic import displace_ridges

rng = np.random.default_rng(11)
gt = random_layout(rng, 4)
maps = displace_ridges(render_oracle(gt), 4)
photo = render_photo(gt)

cues = extract_cues(photo, source="photo")
print(len(cues.segments), "line cues in the photo")

cands = propose(maps)
aligned = align_candidates(cands, cues)
print(len(cands), "proposed,", len(aligned), "after adding aligned variants")

before = min(e_corner(l, gt) for l in cands.layouts)
after = min(e_corner(l, gt) for l in aligned.layouts)
print(f"best e_corner in the pool: {before:.4f} before alignment, {after:.4f} after")
