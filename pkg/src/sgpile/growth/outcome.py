"""Shared result record for the growth models."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class GrowthOutcome:
    """Result of one growth run.

    `cluster` is the set of occupied/received vertices (model-specific);
    `radius` is its out-radius from o, `in_radius` the largest r with
    B_o(r) fully inside the cluster.  For the sandpile, `sink_trace` lists
    the chips paused at each cut-point level during stabilization.
    """

    model: str
    m: object                      # chip count / mass
    graph: object
    cluster: np.ndarray            # vertex indices
    radius: int
    in_radius: int
    final: object = None           # model-specific configuration
    odometer: object = None
    fired: np.ndarray = None
    sink_trace: list = field(default_factory=list)
    seed: object = None
    extra: dict = field(default_factory=dict)

    def is_ball(self):
        """True when the cluster is exactly B_o(radius)."""
        dist = self.graph.dist
        counts = np.bincount(dist[self.cluster],
                             minlength=int(self.graph.side) + 1)
        sizes = self.graph.ring_sizes()
        if self.radius + 1 <= len(counts) and counts[self.radius + 1:].any():
            return False
        return bool((counts[: self.radius + 1]
                     == sizes[: self.radius + 1]).all())

    def summary(self):
        return {
            "model": self.model,
            "m": self.m if not isinstance(self.m, (np.integer,)) else int(self.m),
            "r": int(self.radius),
            "in_radius": int(self.in_radius),
            "out_radius": int(self.radius),
            "cluster_size": int(len(self.cluster)),
            "sink_trace": [[int(n), int(mp)] for n, mp in self.sink_trace],
            "seed": self.seed,
        }

    def to_json(self):
        return json.dumps(self.summary(), sort_keys=True)


def radii_of(graph, member_mask):
    """(out_radius, in_radius) of a vertex set given as a boolean mask."""
    dist = graph.dist
    if not member_mask.any():
        return -1, -1
    out_r = int(dist[member_mask].max())
    counts = np.bincount(dist[member_mask], minlength=graph.side + 1)
    sizes = graph.ring_sizes()
    full = counts[: len(sizes)] == sizes
    in_r = 0
    while in_r + 1 < len(full) and full[in_r + 1]:
        in_r += 1
    if not full[0]:
        in_r = -1
    return out_r, in_r
