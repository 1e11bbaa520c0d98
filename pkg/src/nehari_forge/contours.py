"""Level curves of grid fields by marching squares, written as SVG and CSV."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Disk, Grid, Rectangle


@dataclass
class Contour:
    level: float
    lines: list[np.ndarray]  # each (m, 2) array of (x, y) points

    @property
    def closed(self) -> list[bool]:
        return [len(p) > 2 and np.allclose(p[0], p[-1]) for p in self.lines]


def _lattice_coords(g: Grid) -> tuple[np.ndarray, np.ndarray]:
    cx, cy = g.domain.center
    xs = cx + (np.arange(g.nx) - 0.5 * (g.nx - 1)) * g.h
    ys = cy + (np.arange(g.ny) - 0.5 * (g.ny - 1)) * g.h
    return xs, ys


def _edge_point(edge, L, xs, ys, level):
    kind, j, i = edge
    if kind == "h":
        va, vb = L[j, i], L[j, i + 1]
        t = (level - va) / (vb - va)
        return xs[i] + t * (xs[i + 1] - xs[i]), ys[j]
    va, vb = L[j, i], L[j + 1, i]
    t = (level - va) / (vb - va)
    return xs[i], ys[j] + t * (ys[j + 1] - ys[j])


def _cell_segments(L, j, i, level):
    v = (L[j, i], L[j, i + 1], L[j + 1, i + 1], L[j + 1, i])
    above = [x > level for x in v]
    e = (("h", j, i), ("v", j, i + 1), ("h", j + 1, i), ("v", j, i))
    # edge k joins corners k and k+1
    crossing = [k for k in range(4) if above[k] != above[(k + 1) % 4]]
    if len(crossing) == 2:
        return [(e[crossing[0]], e[crossing[1]])]
    if len(crossing) == 4:
        centre_above = sum(v) / 4.0 > level
        if above[0] == centre_above:
            # corners 0 and 2 are connected through the centre
            return [(e[0], e[1]), (e[2], e[3])]
        return [(e[3], e[0]), (e[1], e[2])]
    return []


def _chain(segments: list[tuple]) -> list[list]:
    adj: dict = {}
    for s_id, (a, b) in enumerate(segments):
        adj.setdefault(a, []).append(s_id)
        adj.setdefault(b, []).append(s_id)
    used = [False] * len(segments)
    lines = []

    def walk(start_edge, s_id):
        path = [start_edge]
        edge = start_edge
        while s_id is not None:
            used[s_id] = True
            a, b = segments[s_id]
            edge = b if a == edge else a
            path.append(edge)
            s_id = next((s for s in adj[edge] if not used[s]), None)
        return path

    # open lines start at edges with a single segment
    for edge, segs in adj.items():
        if len(segs) == 1 and not used[segs[0]]:
            lines.append(walk(edge, segs[0]))
    for s_id in range(len(segments)):
        if not used[s_id]:
            lines.append(walk(segments[s_id][0], s_id))
    return lines


def extract_contours(g: Grid, u: np.ndarray, levels) -> list[Contour]:
    """Marching-squares polylines of ``u`` at each level.

    Only cells whose four corners are interior nodes are used.  In a
    saddle cell the corners sharing the sign of the cell average (relative
    to the level) are taken as connected.
    """
    g.check(u)
    L = g.to_lattice(u)
    M = g.mask
    xs, ys = _lattice_coords(g)
    full = M[:-1, :-1] & M[:-1, 1:] & M[1:, :-1] & M[1:, 1:]
    out = []
    for level in levels:
        level = float(level)
        A = L > level
        mixed = full & ~(
            (A[:-1, :-1] == A[:-1, 1:]) & (A[:-1, :-1] == A[1:, :-1]) & (A[:-1, :-1] == A[1:, 1:])
        )
        segments = []
        for j, i in zip(*np.nonzero(mixed)):
            segments.extend(_cell_segments(L, int(j), int(i), level))
        lines = [
            np.array([_edge_point(e, L, xs, ys, level) for e in path]) for path in _chain(segments)
        ]
        out.append(Contour(level, lines))
    return out


def _bbox(g: Grid) -> tuple[float, float, float, float]:
    d = g.domain
    if isinstance(d, Rectangle):
        return d.x0, d.x1, d.y0, d.y1
    if isinstance(d, Disk):
        return d.cx - d.radius, d.cx + d.radius, d.cy - d.radius, d.cy + d.radius
    raise TypeError(f"unknown domain {d!r}")


def contours_svg(g: Grid, contours: list[Contour], size: int = 400) -> str:
    """SVG drawing of the domain outline and the level curves (y axis up)."""
    x0, x1, y0, y1 = _bbox(g)
    scale = size / max(x1 - x0, y1 - y0)
    W, H = (x1 - x0) * scale, (y1 - y0) * scale
    px = lambda x: (x - x0) * scale  # noqa: E731
    py = lambda y: (y1 - y) * scale  # noqa: E731
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.1f}" height="{H:.1f}" '
        f'viewBox="0 0 {W:.1f} {H:.1f}">'
    ]
    d = g.domain
    if isinstance(d, Rectangle):
        parts.append(f'<rect x="0" y="0" width="{W:.1f}" height="{H:.1f}" fill="none" stroke="black"/>')
    else:
        parts.append(
            f'<circle cx="{px(d.cx):.2f}" cy="{py(d.cy):.2f}" r="{d.radius * scale:.2f}" '
            'fill="none" stroke="black"/>'
        )
    for c in contours:
        colour = "#c0392b" if c.level > 0 else "#2471a3" if c.level < 0 else "#555555"
        for line in c.lines:
            pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in line)
            parts.append(
                f'<polyline data-level="{c.level!r}" points="{pts}" fill="none" '
                f'stroke="{colour}" stroke-width="1"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def contours_csv(contours: list[Contour]) -> str:
    """One row per point: ``level,line,x,y``; lines are separated by index."""
    rows = ["level,line,x,y"]
    for c in contours:
        for k, line in enumerate(c.lines):
            rows.extend(f"{c.level!r},{k},{float(x)!r},{float(y)!r}" for x, y in line)
    return "\n".join(rows) + "\n"


def write_contours(path_svg: str | Path, path_csv: str | Path, g: Grid, contours: list[Contour]) -> None:
    Path(path_svg).write_text(contours_svg(g, contours), encoding="utf-8")
    Path(path_csv).write_text(contours_csv(contours), encoding="utf-8")
