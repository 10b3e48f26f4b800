"""Deterministic rendering of configurations and result plots.

Vertex colors follow a fixed four-color palette for chip counts 0-3 (an
artifact constant; the overflow color marks transient values >= 4 and sink
vertices are drawn dark).  render_config produces byte-identical PNGs for
identical inputs; the matplotlib plots are for human inspection and are
not byte-locked.
"""

from __future__ import annotations

import csv
import io
import math

import numpy as np
from PIL import Image, ImageDraw

from .errors import UsageError

PALETTE = {
    0: (236, 0, 140),    # magenta
    1: (0, 166, 81),     # green
    2: (0, 174, 239),    # cyan
    3: (46, 49, 146),    # blue
}
OVERFLOW_COLOR = (255, 242, 0)   # >= 4 chips (transient states)
SINK_COLOR = (35, 31, 32)
BACKGROUND = (255, 255, 255)

SQRT3_2 = math.sqrt(3.0) / 2.0


def _chip_color(value):
    if value in PALETTE:
        return PALETTE[value]
    return OVERFLOW_COLOR


def render_config(config, scale=8, margin=1):
    """Raster image of a chip configuration; returns a PIL Image.

    `config` is a SandpileConfig or any object with `.view`/`.chips`, or a
    (graph, values) pair.  Vertices sit at their lattice positions; each is
    a filled disc colored by chip count, sinks dark.
    """
    if isinstance(config, tuple):
        graph, values = config
        sink_mask = np.zeros(graph.n_vertices, dtype=bool)
    else:
        graph = config.view.graph
        values = config.chips
        sink_mask = config.view.sink_mask
    px, py = graph.positions()
    x0, x1 = px.min(), px.max()
    y0, y1 = py.min(), py.max()
    w = int((x1 - x0 + 2 * margin) * scale) + 1
    h = int((y1 - y0 + 2 * margin) * scale) + 1
    img = Image.new("RGB", (w, h), BACKGROUND)
    draw = ImageDraw.Draw(img)
    rad = max(scale * 0.38, 1.0)
    for v in range(graph.n_vertices):
        cx = (px[v] - x0 + margin) * scale
        cy = h - 1 - (py[v] - y0 + margin) * scale
        color = SINK_COLOR if sink_mask[v] else _chip_color(int(values[v]))
        draw.ellipse([cx - rad, cy - rad, cx + rad, cy + rad], fill=color)
    return img


def render_png_bytes(config, scale=8):
    img = render_config(config, scale)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def config_to_csv(config, fh):
    """`i,j,chips` lines for the non-sink vertices (sorted by (j, i))."""
    g = config.view.graph
    wr = csv.writer(fh)
    wr.writerow(["i", "j", "chips"])
    order = np.lexsort((g.i, g.j))
    for v in order:
        if config.view.sink_mask[v] or g.flag[v]:
            continue
        wr.writerow([int(g.i[v]), int(g.j[v]), int(config.chips[v])])


def config_from_csv(view, fh):
    """Inverse of config_to_csv on a matching sinked view."""
    from .sandpile import SandpileConfig

    g = view.graph
    rd = csv.reader(fh)
    header = next(rd)
    if header[:3] != ["i", "j", "chips"]:
        raise UsageError("not a configuration CSV")
    chips = np.zeros(g.n_vertices, dtype=np.int64)
    for row in rd:
        if not row:
            continue
        v = g.vertex_index(int(row[0]), int(row[1]))
        if v < 0:
            raise UsageError(f"vertex ({row[0]},{row[1]}) not in the graph")
        chips[v] = int(row[2])
    return SandpileConfig(view, chips)


# ---------------------------------------------------------------------------
# Plots (matplotlib; lazily imported so headless CSV paths stay light)
# ---------------------------------------------------------------------------

def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_radius_series(ms, radii, path, bounds=(0.3871, 0.75)):
    """Stepped radius-vs-mass curve with the global power-law envelope."""
    from .radial import D_H

    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.step(ms, radii, where="post", lw=0.8, label="cluster radius")
    xs = np.asarray(ms, dtype=float)
    ax.plot(xs, bounds[0] * xs ** (1 / D_H), "g--", lw=0.8,
            label=f"{bounds[0]} m^(1/d)")
    ax.plot(xs, bounds[1] * xs ** (1 / D_H), "r--", lw=0.8,
            label=f"{bounds[1]} m^(1/d)")
    ax.set_xlabel("mass m")
    ax.set_ylabel("radius")
    ax.legend()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_gfunction(xs, values, path):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(xs, values, lw=0.9)
    ax.set_xlabel("x (one log-3 period)")
    ax.set_ylabel("profile value")
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_fluctuations(records, path):
    """Min in-radius / max out-radius envelopes per target radius."""
    plt = _plt()
    byn = {}
    for r in records:
        byn.setdefault(r["n"], []).append(r)
    ns = sorted(byn)
    out_max = [max(x["out_radius"] for x in byn[n]) for n in ns]
    in_min = [min(x["in_radius"] for x in byn[n]) for n in ns]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(ns, ns, "k:", lw=0.8, label="target")
    ax.plot(ns, out_max, "o-", ms=3, label="max out-radius")
    ax.plot(ns, in_min, "s-", ms=3, label="min in-radius")
    ax.set_xlabel("target radius n")
    ax.set_ylabel("radius")
    ax.legend()
    fig.savefig(path, dpi=120)
    plt.close(fig)
