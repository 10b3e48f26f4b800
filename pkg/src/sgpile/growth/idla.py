"""Internal DLA: random walkers from o settle at the first unvisited site.

Walk steps are uniform over neighbors.  Randomness comes from per-run
Philox streams consumed as raw 32-bit words (degrees are powers of two, so
neighbor choice by masking is bias-free).  Ensemble reductions are ordered
by run index, making results independent of execution interleaving.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .. import _kernels
from ..errors import UsageError
from ..gasket import build_gasket
from .outcome import GrowthOutcome, radii_of
from .rng import RandomBits, run_generator


def _host_for_particles(m):
    level = 3
    while True:
        g = build_gasket(level)
        # crude but safe: the cluster has at most m vertices, and the ball
        # of radius side/2 already holds ~ (3/2) 3^(level-1) of them
        if g.ball(g.side // 2).size > m:
            return g
        level += 1


def idla(m, seed, host=None):
    """One IDLA cluster of m particles; returns a GrowthOutcome."""
    if m < 1:
        raise UsageError("need at least one particle")
    host = host or _host_for_particles(m)
    occupied = np.zeros(host.n_vertices, dtype=np.uint8)
    bits = RandomBits(seed)
    state = np.zeros(4, dtype=np.int64)
    while True:
        status = _kernels.idla_run(host.indptr, host.indices, occupied,
                                   host.o, m, bits.next_chunk(), state)
        if status == 0:
            break
    mask = occupied.astype(bool)
    out_r, in_r = radii_of(host, mask)
    if out_r >= host.side // 2:
        raise AssertionError("IDLA cluster reached the host margin")
    return GrowthOutcome(
        model="idla", m=m, graph=host, cluster=np.nonzero(mask)[0],
        radius=out_r, in_radius=in_r, final=occupied, seed=seed,
    )


def idla_ensemble(n, runs, seed, poisson=False, workers=None, host=None):
    """IDLA statistics at target radius n with m = |B_o(n)| particles.

    Each run r uses the independent stream (seed, r).  With poisson=True
    the particle count is Poisson(|B_o(n)|) per run (continuous-time
    picture at t = |B_o(n)|).  Returns a dict with per-run radii and the
    fluctuation records rescaled by sqrt(log n).
    """
    if runs < 1:
        raise UsageError("runs must be >= 1")
    host = host or _target_host(n)
    m0 = host.ball(n).size

    def one(run):
        gen = run_generator(seed, run)
        m = int(gen.poisson(m0)) if poisson else m0
        m = max(m, 1)
        occupied = np.zeros(host.n_vertices, dtype=np.uint8)
        bits = RandomBits(seed, run_index=runs + run)  # walk stream
        state = np.zeros(4, dtype=np.int64)
        while True:
            status = _kernels.idla_run(host.indptr, host.indices, occupied,
                                       host.o, m, bits.next_chunk(), state)
            if status == 0:
                break
        mask = occupied.astype(bool)
        out_r, in_r = radii_of(host, mask)
        return m, out_r, in_r, mask

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, range(runs)))
    else:
        results = [one(r) for r in range(runs)]

    scale = np.sqrt(np.log(n))
    records = []
    masks = []
    for run, (m, out_r, in_r, mask) in enumerate(results):
        dev = max(abs(out_r - n), abs(n - in_r))
        records.append({
            "n": n, "run": run, "m": m,
            "out_radius": out_r, "in_radius": in_r,
            "rescaled_dev": dev / scale,
        })
        masks.append(mask)
    return {
        "n": n, "m_target": m0, "seed": seed, "poisson": poisson,
        "records": records, "masks": masks, "host": host,
    }


def _target_host(n):
    level = 1
    while (1 << level) < 2 * n:
        level += 1
    return build_gasket(level + 1)


def _geodesic_sphere_ancestors(host, r):
    """For each vertex at distance >= r, the sphere vertices lying on its
    geodesics from o (as an index into sphere_list / bitmask)."""
    sphere = np.nonzero(host.dist == r)[0]
    sidx = {int(v): k for k, v in enumerate(sphere)}
    nsph = len(sphere)
    order = np.argsort(host.dist, kind="stable")
    anc = {}
    for v in order:
        d = host.dist[v]
        if d < r:
            continue
        if d == r:
            anc[int(v)] = 1 << sidx[int(v)]
            continue
        mask = 0
        for w in host.neighbors(v):
            if host.dist[w] == d - 1:
                mask |= anc.get(int(w), 0)
        anc[int(v)] = mask
    return sphere, anc


def h_function(host, cluster_mask, r, sphere=None, anc=None):
    """Tentacle heights over the sphere S_o(r).

    h(x) = A(x) - r where A(x) is the largest distance-from-o of a cluster
    vertex having x on one of its geodesics from o (A(x) = r - 1 when x is
    vacant and nothing grows above it, so h is floored at -1).
    """
    if sphere is None or anc is None:
        sphere, anc = _geodesic_sphere_ancestors(host, r)
    a = np.full(len(sphere), r - 1, dtype=np.int64)
    for v in np.nonzero(cluster_mask)[0]:
        d = host.dist[v]
        if d < r:
            continue
        mask = anc[int(v)]
        k = 0
        while mask:
            if mask & 1:
                if d > a[k]:
                    a[k] = d
            mask >>= 1
            k += 1
    return sphere, a - r


def h_covariance(ensemble, r):
    """Pairwise covariance matrix of h over the ensemble's runs."""
    host = ensemble["host"]
    sphere, anc = _geodesic_sphere_ancestors(host, r)
    rows = []
    for mask in ensemble["masks"]:
        _, h = h_function(host, mask, r, sphere, anc)
        rows.append(h / np.sqrt(np.log(r)))
    data = np.array(rows, dtype=float)
    return sphere, np.cov(data, rowvar=False)
