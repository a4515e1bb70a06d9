"""Grid-world rendering: deterministic SVG plus ASCII art.

Obstacles are black, free cells white, start cells red, goal cells
green, initial-region cells a lighter red; with the row-observation
option a vertical color gradient shades the rows.  Witness paths are
drawn as polylines through cell centers, the first (synthesized) path
in blue and the exhibited second path in red; a path that falls into
the crash state ends with a cross marker.  The SVG text is a pure
function of its inputs, so golden files diff cleanly.
"""
from __future__ import annotations

from dataclasses import dataclass

from .dts import CRASH, GridMap, cell_coords


class TraceOffGrid(ValueError):
    def __init__(self, detail: str):
        super().__init__(f"trace leaves the grid: {detail}")


@dataclass(frozen=True)
class RenderStyle:
    cell: int = 32
    margin: int = 8
    stroke: int = 4
    path_colors: tuple[str, ...] = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    obstacle: str = "#111111"
    free: str = "#ffffff"
    start: str = "#e05344"
    region: str = "#f2a097"
    goal: str = "#59b35c"
    grid_line: str = "#bbbbbb"
    row_gradient: bool = False


def trace_cells(grid: GridMap, trace) -> list[str]:
    """Cell names visited by a trace.

    Accepts either a list of label sets (augmented traces) or a list of
    state names; stops at the first crash entry.
    """
    cells: list[str] = []
    for i, entry in enumerate(trace):
        if isinstance(entry, str):
            candidates = [entry]
        else:
            candidates = [p for p in entry if p == CRASH or cell_coords(p)]
        name = None
        for c in candidates:
            if c == CRASH:
                name = CRASH
                break
            rc = cell_coords(c)
            if rc and grid.is_free(*rc):
                name = c
                break
        if name is None:
            raise TraceOffGrid(f"step {i} carries no grid cell: {sorted(candidates) or trace[i]}")
        cells.append(name)
        if name == CRASH:
            break
    return cells


def _cell_fill(grid: GridMap, r: int, c: int, style: RenderStyle) -> str:
    ch = grid.rows[r][c]
    if ch == "#":
        return style.obstacle
    if ch == "S":
        return style.start
    if ch == "R":
        return style.region
    if ch == "G":
        return style.goal
    if style.row_gradient:
        # light top-to-bottom blend so the observed row number is visible
        frac = r / max(grid.n_rows - 1, 1)
        level = int(255 - 64 * frac)
        return f"#{level:02x}{level:02x}ff"
    return style.free


def render_svg(grid: GridMap, traces=(), style: RenderStyle | None = None) -> str:
    style = style or RenderStyle()
    cs, mg = style.cell, style.margin
    width = grid.n_cols * cs + 2 * mg
    height = grid.n_rows * cs + 2 * mg

    def center(r: int, c: int) -> tuple[float, float]:
        return (mg + (c + 0.5) * cs, mg + (r + 0.5) * cs)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for r in range(grid.n_rows):
        for c in range(grid.n_cols):
            fill = _cell_fill(grid, r, c, style)
            out.append(f'<rect x="{mg + c * cs}" y="{mg + r * cs}" width="{cs}" '
                       f'height="{cs}" fill="{fill}" stroke="{style.grid_line}" '
                       f'stroke-width="1"/>')

    for i, trace in enumerate(traces):
        color = style.path_colors[i % len(style.path_colors)]
        cells = trace_cells(grid, trace)
        crashed = cells and cells[-1] == CRASH
        coords = [cell_coords(c) for c in cells if c != CRASH]
        if not coords:
            continue
        # nudge overlapping paths apart so both stay visible
        off = (i - (len(traces) - 1) / 2) * min(6, cs // 6)
        pts = " ".join(f"{x + off:.1f},{y + off:.1f}"
                       for x, y in (center(r, c) for r, c in coords))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="{style.stroke}" stroke-linecap="round" '
                   f'stroke-linejoin="round" opacity="0.85"/>')
        x0, y0 = center(*coords[0])
        out.append(f'<circle cx="{x0 + off:.1f}" cy="{y0 + off:.1f}" r="{cs * 0.18:.1f}" '
                   f'fill="{color}"/>')
        if crashed:
            x, y = center(*coords[-1])
            d = cs * 0.28
            for sx, sy in ((1, 1), (1, -1)):
                out.append(f'<line x1="{x - sx * d + off:.1f}" y1="{y - sy * d + off:.1f}" '
                           f'x2="{x + sx * d + off:.1f}" y2="{y + sy * d + off:.1f}" '
                           f'stroke="{color}" stroke-width="{style.stroke}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_ascii(grid: GridMap, traces=()) -> str:
    """Map overlaid with path indices (1, 2, ...), '*' where paths meet,
    'x' where a path crashes out."""
    canvas = [list(row) for row in grid.rows]

    def put(r: int, c: int, mark: str) -> None:
        cur = canvas[r][c]
        canvas[r][c] = "*" if cur.isdigit() and cur != mark else mark

    for i, trace in enumerate(traces):
        mark = str(i + 1)
        cells = trace_cells(grid, trace)
        last_rc = None
        for name in cells:
            if name == CRASH:
                if last_rc is not None:
                    canvas[last_rc[0]][last_rc[1]] = "x"
                break
            r, c = cell_coords(name)
            put(r, c, mark)
            last_rc = (r, c)
    lines = ["".join(row) for row in canvas]
    legend = [f"path {i + 1}: {str(i + 1)}" for i in range(len(traces))]
    if legend:
        lines.append("")
        lines.append("  ".join(legend))
    return "\n".join(lines) + "\n"
