"""Built-in benchmark models.

The grid maps are re-creations of the published obstacle benchmarks
with matching qualitative structure (start region bottom-left, an
obstacle field, a goal block).  The goal block sits in the interior
with two cells of clearance around the approach corridors: under the
crash-totalized dynamics a single replaced action translates the whole
remaining path, so action-robust plans only exist when the translated
paths still cut through the goal block without clipping an obstacle or
the boundary.
"""
from __future__ import annotations

GRID10 = """\
##.......#
##........
.....GGGG.
..#..GGGG.
..#..GGGG.
.....GGGG.
..........
..........
.SRR......
.......###
options:
row_observation
"""

GRID20 = """\
####................
####................
....................
....................
...........GGGGGG...
...........GGGGGG...
..##.......GGGGGG...
..##.......GGGGGG...
...........GGGGGG...
...........GGGGGG...
....................
....................
......##............
......##............
....................
....................
..SRR...............
....................
............##......
..............####..
options:
row_observation
"""

ROOMS = """\
states: s0 s1 s2 s3 s4 s5
actions: L R U D
trans: s0 R s1
trans: s1 R s2
trans: s3 R s4
trans: s4 R s5
trans: s1 L s0
trans: s2 L s1
trans: s4 L s3
trans: s5 L s4
trans: s0 U s3
trans: s1 U s4
trans: s2 U s5
trans: s3 D s0
trans: s4 D s1
trans: s5 D s2
label: s4 goal
label: s5 goal
"""

BUILTIN = {
    "grid10": GRID10,
    "grid20": GRID20,
    "rooms": ROOMS,
}


def builtin_names() -> tuple[str, ...]:
    return tuple(sorted(BUILTIN))


def builtin_text(name: str) -> str:
    try:
        return BUILTIN[name]
    except KeyError:
        raise KeyError(f"unknown builtin model {name!r}; "
                       f"available: {', '.join(builtin_names())}") from None
