"""Static SVG frames of an execution log.

The agent deck is drawn first (circles) and the shelf deck on top of it
(translucent squares), so an agent standing under a shelf stays visible.
Delivery cells of shelves that move are outlined in the shelf's colour.
"""
from __future__ import annotations

import colorsys
from pathlib import Path as FsPath

from .domain import FREE, ExecutionLog, Instance, at

CELL = 24


def _colour(j: int, n: int) -> str:
    r, g, b = colorsys.hsv_to_rgb((j * 0.618034) % 1.0, 0.55, 0.9)
    return f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"


def render_frame(instance: Instance, log: ExecutionLog, t: int, cell: int = CELL) -> str:
    """SVG text for timestep ``t``.  Reads the log only."""
    grid = instance.grid
    w, h = grid.width * cell, grid.height * cell
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h + cell}" '
           f'viewBox="0 0 {w} {h + cell}">',
           f'<rect width="{w}" height="{h}" fill="#ffffff"/>']
    for r in range(grid.height):
        for c in range(grid.width):
            fill = "#333333" if not grid.is_free((r, c)) else "#f4f4f4"
            out.append(f'<rect x="{c * cell}" y="{r * cell}" width="{cell - 1}" '
                       f'height="{cell - 1}" fill="{fill}"/>')
    m = instance.num_shelves
    for j, s in enumerate(instance.shelves):
        if s.needs_relocation:
            r, c = s.delivery
            out.append(f'<rect x="{c * cell + 2}" y="{r * cell + 2}" width="{cell - 5}" '
                       f'height="{cell - 5}" fill="none" stroke="{_colour(j, m)}" '
                       f'stroke-width="2" stroke-dasharray="3,2"/>')
    # agent deck
    for i, p in enumerate(log.agent_paths):
        r, c = at(p, t)
        carrying = log.carrying[i][t] if t < len(log.carrying[i]) else FREE
        stroke = "#000000" if carrying != FREE else "#666666"
        out.append(f'<circle cx="{c * cell + cell / 2}" cy="{r * cell + cell / 2}" '
                   f'r="{cell * 0.38:.1f}" fill="#2b6cb0" stroke="{stroke}"/>')
        out.append(f'<text x="{c * cell + cell / 2}" y="{r * cell + cell / 2 + 4}" '
                   f'font-size="{cell // 2}" text-anchor="middle" fill="#ffffff">{i}</text>')
    # shelf deck
    for j, p in enumerate(log.shelf_paths):
        r, c = at(p, t)
        out.append(f'<rect x="{c * cell + 3}" y="{r * cell + 3}" width="{cell - 7}" '
                   f'height="{cell - 7}" fill="{_colour(j, m)}" fill-opacity="0.55" '
                   f'stroke="#444444" stroke-width="0.5"/>')
    out.append(f'<text x="4" y="{h + cell * 0.75}" font-size="{cell // 2}">t = {t}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_frames(instance: Instance, log: ExecutionLog, cell: int = CELL) -> list[str]:
    return [render_frame(instance, log, t, cell) for t in range(log.horizon + 1)]


def write_frames(instance: Instance, log: ExecutionLog, out_dir, cell: int = CELL) -> list[FsPath]:
    """One ``frame_XXXX.svg`` per timestep; returns the files written."""
    out_dir = FsPath(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for t, svg in enumerate(render_frames(instance, log, cell)):
        f = out_dir / f"frame_{t:04d}.svg"
        f.write_text(svg)
        files.append(f)
    return files
