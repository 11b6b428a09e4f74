"""Standalone SVG rendering of embedded trajectories, coloured red to blue by epoch."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MARGIN = 40


@dataclass(frozen=True)
class PlotSpec:
    coords_path: str
    out_path: str
    width: int = 800
    height: int = 600

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("plot width and height must be positive")


def parse_snapshot_id(sid: str) -> tuple[int, int]:
    """'run:epoch' -> (run, epoch)."""
    run, sep, epoch = sid.partition(":")
    if not sep:
        raise ValueError(f"snapshot id {sid!r} is not of the form run:epoch")
    try:
        return int(run), int(epoch)
    except ValueError:
        raise ValueError(f"snapshot id {sid!r} is not of the form run:epoch") from None


def epoch_color(epoch: int, first: int, last: int) -> str:
    t = 0.0 if last == first else (epoch - first) / (last - first)
    return "#{:02x}00{:02x}".format(round(255 * (1 - t)), round(255 * t))


def render_svg(ids: Sequence[str], coords, width: int = 800, height: int = 600) -> str:
    """One grey polyline per run, with epoch-coloured markers along it."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape[0] != len(ids):
        raise ValueError(f"{len(ids)} ids but {coords.shape[0]} coordinate rows")
    keys = [parse_snapshot_id(s) for s in ids]

    x0, y0 = MARGIN, height - MARGIN
    x1, y1 = width - MARGIN, MARGIN
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line class="axis" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]
    if keys:
        xy = coords[:, :2] if coords.shape[1] >= 2 else np.column_stack([coords[:, 0], np.zeros(len(keys))])
        lo, hi = xy.min(axis=0), xy.max(axis=0)
        span = float(max(hi[0] - lo[0], hi[1] - lo[1])) or 1.0
        scale = min(x1 - x0, y0 - y1) / span
        mid = (lo + hi) / 2.0
        cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
        px = cx + (xy[:, 0] - mid[0]) * scale
        py = cy - (xy[:, 1] - mid[1]) * scale

        epochs = [e for _, e in keys]
        first, last = min(epochs), max(epochs)
        runs = sorted({r for r, _ in keys})
        for run in runs:
            members = sorted((e, i) for i, (r, e) in enumerate(keys) if r == run)
            pts = " ".join(f"{px[i]:.2f},{py[i]:.2f}" for _, i in members)
            out.append(f'<g class="run" data-run="{run}">')
            out.append(f'<polyline points="{pts}" fill="none" stroke="#888888" stroke-width="1"/>')
            for e, i in members:
                out.append(
                    f'<circle cx="{px[i]:.2f}" cy="{py[i]:.2f}" r="3" '
                    f'fill="{epoch_color(e, first, last)}" data-epoch="{e}"/>'
                )
            out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
