"""Single-source abelian sandpile growth: naive and hierarchical engines.

Both engines stabilize m chips dropped at o on a one-sided gasket host large
enough to contain the cluster, and return identical results (configuration,
odometer, radius).  The hierarchical engine exploits the cut-point
structure: it stabilizes level by level, pausing chips on the two cut
points of each level, and then discharges them with batched simultaneous
topplings that keep the (recurrent) interior intact.
"""

from __future__ import annotations

import numpy as np

from .. import _kernels
from ..errors import CapacityError, UsageError
from ..gasket import MAX_LEVEL, build_gasket
from ..sandpile import (SandpileConfig, batch_topple_boundary, stabilize)
from .outcome import GrowthOutcome, radii_of


def mass_level(m):
    """Largest n with 4*3^n <= m (the level the cluster fills), or 0."""
    n = 0
    while 4 * 3 ** (n + 1) <= m:
        n += 1
    return n if 4 * 3**n <= m else 0


def host_level_for_mass(m):
    """Host graph level whose interior safely contains the cluster of m chips.

    The cluster of m chips lies inside the level-(n*+1) triangle where n* is
    the largest n with 4*3^n <= m; one more level gives every cluster vertex
    its true degree.
    """
    n = 0
    while 4 * 3**n <= m:
        n += 1
    host = max(n, 1) + 1
    if host > MAX_LEVEL:
        raise CapacityError(
            f"mass {m} needs a level-{host} host, above the maximum {MAX_LEVEL}")
    return host


def _pause_masks(host, k):
    """(may_fire mask for the level-k pause stage, cut-point indices)."""
    s = 1 << k
    cx = host.vertex_index(s, 0)
    cy = host.vertex_index(0, s)
    may = host.dist <= s
    may[cx] = may[cy] = False
    return may, cx, cy


def _finish_outcome(model, m, host, chips, odometer, trace, engine):
    recv = _kernels.received_counts(host.indptr, host.indices, odometer)
    member = recv >= 1
    member[host.o] = True
    cluster = np.nonzero(member)[0]
    out_r, in_r = radii_of(host, member)
    fired = np.nonzero(odometer > 0)[0]
    outcome = GrowthOutcome(
        model=model, m=int(m), graph=host, cluster=cluster,
        radius=out_r, in_radius=in_r,
        final=SandpileConfig(host.sinked_view("none"), chips),
        odometer=odometer, fired=fired, sink_trace=trace,
        extra={"engine": engine},
    )
    if not outcome.is_ball():
        raise AssertionError(f"receiving set of m={m} is not a ball")
    # firing set is sandwiched between B(r-1) and the receiving ball
    if len(fired):
        fr_out, fr_in = radii_of(host, odometer > 0)
        if not (fr_in >= out_r - 1 and fr_out <= out_r):
            raise AssertionError(f"firing set violates the sandwich at m={m}")
    return outcome


def _pause_trace(m, host):
    """Chips paused at each cut-point level: the (k, m'_k) trace."""
    trace = []
    if m < 12:
        return trace
    n_star = mass_level(m)
    for k in range(1, n_star + 1):
        may, cx, cy = _pause_masks(host, k)
        chips = np.zeros(host.n_vertices, dtype=np.int64)
        chips[host.o] = m
        odo = np.zeros(host.n_vertices, dtype=np.int64)
        budget = 64 * m * host.n_vertices
        done = _kernels.stabilize(host.indptr, host.indices, host.deg,
                                  chips, odo, may, budget)
        assert done >= 0
        assert chips[cx] == chips[cy], "cut-point symmetry broken"
        trace.append((k, int(chips[cx])))
    return trace


def _grow_naive(m, host):
    view = host.sinked_view("none")
    res = stabilize(SandpileConfig.point_mass(view, m))
    return res.final.chips, res.odometer


def _grow_hier(m, host):
    chips = np.zeros(host.n_vertices, dtype=np.int64)
    odometer = np.zeros(host.n_vertices, dtype=np.int64)
    chips[host.o] = m
    n_star = mass_level(m)
    budget = 64 * max(m, 1) * host.n_vertices
    trace = []

    for k in range(1, n_star + 1):
        may, cx, cy = _pause_masks(host, k)
        done = _kernels.stabilize(host.indptr, host.indices, host.deg,
                                  chips, odometer, may, budget)
        assert done >= 0
        assert chips[cx] == chips[cy], "cut-point symmetry broken"
        trace.append((k, int(chips[cx])))

        # discharge the paused chips with batched simultaneous topplings,
        # alternating with tail stabilization outside the level-k triangle
        s = 1 << k
        nxt = 1 << (k + 1)
        tail_may = (host.dist <= nxt) & (host.dist > s)
        tail_may[host.vertex_index(nxt, 0)] = False
        tail_may[host.vertex_index(0, nxt)] = False
        while chips[cx] >= 4:
            rounds = (chips[cx] - 2 - (chips[cx] % 2)) // 2
            ok = batch_topple_boundary(chips, odometer, host, k, rounds)
            if not ok:
                # non-recurrent interior: fall back to ordinary toppling
                # with the cut points unfrozen
                may2 = may.copy()
                may2[cx] = may2[cy] = True
                done = _kernels.stabilize(host.indptr, host.indices,
                                          host.deg, chips, odometer, may2,
                                          budget)
                assert done >= 0
            done = _kernels.stabilize(host.indptr, host.indices, host.deg,
                                      chips, odometer, tail_may, budget)
            assert done >= 0
            assert chips[cx] == chips[cy]

    # final pass: everything (except true host corners, which never charge)
    may = np.ones(host.n_vertices, dtype=bool)
    may[[host.x, host.y]] = False
    done = _kernels.stabilize(host.indptr, host.indices, host.deg,
                              chips, odometer, may, budget)
    assert done >= 0
    assert chips[host.x] < 4 and chips[host.y] < 4
    return chips, odometer, trace


def sandpile_growth(m, engine="naive", with_trace=True):
    """Stabilize m 1_o on the one-sided gasket and report the cluster.

    engine='naive' uses the multifire work queue on the whole host;
    engine='hier' stabilizes level by level with batched cut-point
    discharges.  The two produce identical configurations, odometers and
    radii.
    """
    if m < 0:
        raise UsageError("mass must be >= 0")
    host = build_gasket(host_level_for_mass(m))
    if engine == "naive":
        chips, odometer = _grow_naive(m, host)
        trace = _pause_trace(m, host) if with_trace else []
    elif engine in ("hier", "hierarchical"):
        chips, odometer, trace = _grow_hier(m, host)
    else:
        raise UsageError(f"unknown engine {engine!r}")
    return _finish_outcome("sandpile", m, host, chips, odometer, trace, engine)
