from __future__ import annotations

import numpy as np
import pytest

from roomlayout.geometry import Point
from roomlayout.layout import Layout, WWBoundary


def P(x, y):
    return Point(float(x), float(y))


def ww(fx, fy, cx, cy, fv=True, cv=True):
    return WWBoundary(P(fx, fy), P(cx, cy), fv, cv)


def box_room(size=100, xs=(30, 70), yf=80, yc=20, edge_f=90, edge_c=10, ceiling=True, floor=True):
    """Frontal room: vertical ww lines at ``xs``, flat floor/ceiling lines,
    edge closures sloping outwards like a cuboid seen from inside."""
    yf_, yc_ = (yf if floor else size), (yc if ceiling else 0)
    bs = [ww(0, edge_f if floor else size, 0, edge_c if ceiling else 0, False, False)]
    bs += [ww(x, yf_, x, yc_, floor, ceiling) for x in xs]
    bs += [ww(size, edge_f if floor else size, size, edge_c if ceiling else 0, False, False)]
    return Layout(tuple(bs), ceiling, floor, size, size)


def band_floor(size=100, top=60):
    """One wall whose floor is the horizontal band y > top."""
    return Layout((ww(0, top, 0, 0, False, False), ww(size, top, size, 0, False, False)), False, True, size, size)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the run summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
