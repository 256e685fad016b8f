"""
A room as an ordered list of wall-wall boundaries
=================================================

A layout is the left-to-right list of vertical wall-wall boundaries.  Each
boundary has a floor corner and a ceiling corner; the two image edges act as
virtual boundaries.  Everything else (wall/floor/ceiling polygons, boundary
segments, label maps) is derived from that list.
"""
from __future__ import annotations

import numpy as np

from roomlayout import Layout, Point, WWBoundary, label_map, validate
from roomlayout.layout import CEILING, FLOOR, WALL, boundary_segments

# A frontal three-wall room in a 100 x 100 image.  The edge boundaries are
# not visible corners, just where the floor and ceiling lines leave the frame.
room = Layout(
    (
        WWBoundary(Point(0, 90), Point(0, 10), False, False),
        WWBoundary(Point(30, 80), Point(30, 20)),
        WWBoundary(Point(70, 80), Point(70, 20)),
        WWBoundary(Point(100, 90), Point(100, 10), False, False),
    ),
    has_ceiling=True,
    has_floor=True,
    image_width=100,
    image_height=100,
)
print("walls:", room.n_walls, "violations:", validate(room))

for kind, segs in boundary_segments(room).items():
    print(kind, [(tuple(s.a), tuple(s.b)) for s in segs])

labels = label_map(room)
for name, lab in (("wall", WALL), ("floor", FLOOR), ("ceiling", CEILING)):
    print(f"{name:8s} {np.mean(labels == lab):.3f} of the image")

# Swapping two corners breaks the left-to-right order; validation says so
# instead of silently producing a self-intersecting polygon.
broken = Layout((room.boundaries[0], room.boundaries[2], room.boundaries[1], room.boundaries[3]), True, True, 100, 100)
print("swapped:", [v.kind for v in validate(broken)])

# Layouts are plain data and round-trip through JSON.
assert Layout.from_json(room.to_json()) == room
