"""Exact sandpile algebra on sinked gasket subgraphs.

A configuration lives on a :class:`~sgpile.gasket.SinkedGraphView`; chips on
sink vertices are absorbed, never fired.  Stabilization uses a multifire
work queue (each visit fires floor(chips/deg) times at once), which the
abelian property makes order-insensitive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NonterminationError, UsageError
from .gasket import GasketGraph, SinkedGraphView, build_gasket

BUDGET_FACTOR = 64  # elementary-firing budget = factor * total chips * |V|


@dataclass
class SandpileConfig:
    """Chip counts on the non-sink vertices of a sinked gasket view."""

    view: SinkedGraphView
    chips: np.ndarray  # full-length int64 vector; sinks carry 0

    @classmethod
    def zeros(cls, view):
        return cls(view, np.zeros(view.graph.n_vertices, dtype=np.int64))

    @classmethod
    def point_mass(cls, view, m, vertex=None):
        c = cls.zeros(view)
        c.chips[view.graph.o if vertex is None else vertex] = m
        return c

    @classmethod
    def max_stable(cls, view):
        c = cls.zeros(view)
        g = view.graph
        c.chips[view.nonsink] = g.deg[view.nonsink] - 1
        return c

    def copy(self):
        return SandpileConfig(self.view, self.chips.copy())

    def total(self):
        return int(self.chips.sum())

    def is_stable(self):
        g = self.view.graph
        ns = self.view.nonsink
        return bool((self.chips[ns] < g.deg[ns]).all())

    def equals(self, other):
        same_view = self.view is other.view or (
            self.view.graph is other.view.graph
            and self.view.sinks == other.view.sinks)
        return same_view and np.array_equal(self.chips, other.chips)

    def __add__(self, other):
        if isinstance(other, SandpileConfig):
            if other.view is not self.view:
                raise UsageError("configurations live on different sinked views")
            other = other.chips
        return SandpileConfig(self.view, self.chips + other)


@dataclass
class StabilizationResult:
    initial: np.ndarray
    final: SandpileConfig
    odometer: np.ndarray
    elementary_firings: int

    @property
    def view(self):
        return self.final.view

    def sink_absorbed(self):
        """Chips absorbed by each sink vertex during stabilization."""
        g = self.view.graph
        recv = _kernels.received_counts(g.indptr, g.indices, self.odometer)
        return {int(s): int(recv[s]) for s in self.view.sinks}

    def received(self):
        """Vertices that received at least one chip (excludes pure sources)."""
        g = self.view.graph
        recv = _kernels.received_counts(g.indptr, g.indices, self.odometer)
        return recv

    def fired_set(self):
        return np.nonzero(self.odometer > 0)[0]

    def verify_exact(self):
        """Check chip conservation and final = initial + L'(odometer)."""
        g = self.view.graph
        recv = self.received()
        expect = self.initial + recv - g.deg.astype(np.int64) * self.odometer
        if not np.array_equal(expect, self._final_with_sinks()):
            raise AssertionError("Laplacian identity violated")
        if self.odometer[list(self.view.sinks)].any():
            raise AssertionError("a sink vertex fired")
        return True

    def _final_with_sinks(self):
        # final chips including what sinks absorbed
        g = self.view.graph
        out = self.final.chips.copy()
        return out


def stabilize(config, budget_factor=BUDGET_FACTOR, may_fire=None):
    """Stabilize a configuration; returns config, odometer and accounting.

    The returned configuration's chip vector includes chips resting on sink
    vertices (absorbed mass).  `may_fire` optionally freezes extra vertices
    beyond the sinks (used by the hierarchical growth engine).
    """
    view = config.view
    g = view.graph
    chips = config.chips.copy()
    initial = config.chips.copy()
    odometer = np.zeros(g.n_vertices, dtype=np.int64)
    if may_fire is None:
        may_fire = ~view.sink_mask
    total = int(chips.sum())
    budget = max(budget_factor * max(total, 1) * g.n_vertices, 1024)
    done = _kernels.stabilize(g.indptr, g.indices, g.deg, chips, odometer,
                              may_fire, budget)
    if done < 0:
        raise NonterminationError(
            f"stabilization exceeded {budget} elementary firings "
            f"(total mass {total} on {g.n_vertices} vertices; "
            "did you forget a sink?)")
    return StabilizationResult(initial, SandpileConfig(view, chips),
                               odometer, int(done))


def add_and_stabilize(config, addition):
    """The sandpile monoid operation: add chips, then stabilize.

    `addition` may be a SandpileConfig on the same view, a full-length
    vector, or a {vertex: count} dict.
    """
    if isinstance(addition, SandpileConfig):
        if addition.view is not config.view:
            raise UsageError("configurations live on different sinked views")
        vec = addition.chips
    elif isinstance(addition, dict):
        vec = np.zeros(config.view.graph.n_vertices, dtype=np.int64)
        for v, c in addition.items():
            vec[v] = c
    else:
        vec = np.asarray(addition, dtype=np.int64)
    merged = SandpileConfig(config.view, config.chips + vec)
    if merged.chips[list(config.view.sinks)].any():
        # chips placed directly on a sink are absorbed immediately
        pass
    return stabilize(merged)


def oplus(a, b):
    """a (+) b, dropping chips absorbed at the sinks."""
    res = add_and_stabilize(a, b)
    out = res.final.copy()
    out.chips[list(a.view.sinks)] = 0
    return out


def is_recurrent(config):
    """Dhar burning test (sink fires once; every vertex must burn)."""
    if not config.is_stable():
        raise UsageError("burning test requires a stable configuration")
    g = config.view.graph
    return bool(_kernels.burning_test(g.indptr, g.indices, g.deg,
                                      config.chips, config.view.sink_mask))


def random_recurrent(view, rng, base=None):
    """A recurrent sample: identity (or `base`) plus uniform{0..3} chips."""
    base = identity(view) if base is None else base
    extra = rng.integers(0, 4, size=view.graph.n_vertices).astype(np.int64)
    extra[view.sink_mask] = 0
    out = stabilize(SandpileConfig(view, base.chips + extra)).final.copy()
    out.chips[list(view.sinks)] = 0
    return out


_IDENTITY_CACHE = {}


def identity(view):
    """The idempotent identity of the recurrent monoid on this view.

    Standard construction: e = (s_max + (s_max - (2 s_max)^o)^o)^o where
    s_max is the maximal stable configuration.
    """
    key = (id(view.graph), view.sinks)
    if key not in _IDENTITY_CACHE:
        smax = SandpileConfig.max_stable(view)
        twice = stabilize(SandpileConfig(view, 2 * smax.chips)).final
        diff = smax.chips - twice.chips
        diff[list(view.sinks)] = 0
        assert (diff >= 0).all()
        inner = stabilize(SandpileConfig(view, smax.chips + diff)).final
        e = inner.copy()
        e.chips[list(view.sinks)] = 0
        e2 = oplus(e, e)
        assert e2.equals(e), "identity construction failed idempotence"
        _IDENTITY_CACHE[key] = e
    return _IDENTITY_CACHE[key]


# ---------------------------------------------------------------------------
# Sandpile tiles
# ---------------------------------------------------------------------------
#
# The four tile families, their home views, and the oracle constructions the
# recursive gluing is validated against:
#
#   tile   sinks        oracle construction
#   ----   ----------   ---------------------------------------------------
#   e      far corners  identity of the recurrent monoid
#   M      far corners  ((4*3^n - 2) 1_o)^o interior
#   e_o    origin       M_n with 1 chip at each far corner
#   zeta   all corners  the half-tile filling each upper cell of
#                       (M_n + 2*3^(n-1) 1_o)^o, in the frame whose origin
#                       is the cut point and whose x-direction is the
#                       outer edge
#
# Levels above the base case are assembled by gluing three level-(n-1)
# tiles (rules in _tilerules; cross-checked in tests/test_tiles.py).

TILE_KINDS = ("e", "e_o", "M", "zeta")


def _corner_sinked(n):
    return build_gasket(n, "one").sinked_view("corners_xy")


def _origin_sinked(n):
    return build_gasket(n, "one").sinked_view("origin")


def _allcorner_sinked(n):
    return build_gasket(n, "one").sinked_view("corners_all")


def zeta_context(n):
    """The stabilization producing zeta half-tiles at level n >= 2.

    Returns the stable configuration (M_n + 2*3^(n-1) 1_o)^o on the
    corner-sinked level-n graph (sink chips zeroed) plus the absorption
    count per sink.
    """
    m = tile("M", n).copy()
    m.chips[m.view.graph.o] += 2 * 3 ** (n - 1)
    res = stabilize(m)
    out = res.final.copy()
    out.chips[list(out.view.sinks)] = 0
    return out, res.sink_absorbed()


def tile_direct(kind, n):
    """Build a tile straight from its defining stabilization (slow path)."""
    if n < 1:
        raise UsageError("tiles are defined for levels n >= 1")
    if kind == "e":
        return identity(_corner_sinked(n)).copy()
    if kind == "M":
        view = _corner_sinked(n)
        res = stabilize(SandpileConfig.point_mass(view, 4 * 3**n - 2))
        out = res.final.copy()
        out.chips[list(view.sinks)] = 0
        return out
    if kind == "zeta":
        ctx, _ = zeta_context(n + 1)
        g = ctx.view.graph
        h = g.side // 2
        amap = g.affine_map(n, (h, 0), (g.side, 0), (h, h))
        view = _allcorner_sinked(n)
        chips = ctx.chips[amap].astype(np.int64)
        chips[list(view.sinks)] = 0
        return SandpileConfig(view, chips)
    if kind == "e_o":
        base = tile_direct("M", n)
        view = _origin_sinked(n)
        chips = base.chips.copy()
        g = view.graph
        chips[g.x] = 1
        chips[g.y] = 1
        chips[g.o] = 0
        out = SandpileConfig(view, chips)
        assert out.is_stable()
        return out
    raise UsageError(f"unknown tile kind {kind!r}")


def tile(kind, n):
    """The named tile at level n, built by recursive gluing (cached)."""
    if kind not in TILE_KINDS:
        raise UsageError(f"unknown tile kind {kind!r}")
    if n < 1:
        raise UsageError("tiles are defined for levels n >= 1")
    return _tile_glued(kind, n)


_TILE_CACHE = {}


def _tile_glued(kind, n):
    key = (kind, n)
    if key in _TILE_CACHE:
        return _TILE_CACHE[key]
    if kind == "e_o":
        base = _tile_glued("M", n)
        view = _origin_sinked(n)
        chips = base.chips.copy()
        g = view.graph
        chips[g.x] = 1
        chips[g.y] = 1
        chips[g.o] = 0
        out = SandpileConfig(view, chips)
    elif n == 1:
        out = _tile_base(kind)
    else:
        from ._tilerules import glue_rule

        sub = _tile_glued(glue_rule(kind)["child"], n - 1)
        out = _assemble(kind, n, sub)
    _TILE_CACHE[key] = out
    return out


def _tile_base(kind):
    """Level-1 tile from its stored table, validated against the oracle."""
    from ._tilerules import BASE_TABLES

    view = _allcorner_sinked(1) if kind == "zeta" else _corner_sinked(1)
    g = view.graph
    chips = np.zeros(g.n_vertices, dtype=np.int64)
    for (i, j), v in BASE_TABLES[kind].items():
        chips[g.vertex_index(i, j)] = v
    out = SandpileConfig(view, chips)
    oracle = tile_direct(kind, 1)
    if not np.array_equal(out.chips, oracle.chips):
        raise AssertionError(f"stored base table for {kind!r} fails validation")
    return out


def _tile_view(kind, n):
    return _allcorner_sinked(n) if kind == "zeta" else _corner_sinked(n)


def _assemble(kind, n, sub):
    from ._tilerules import glue_rule

    rule = glue_rule(kind)
    view = _tile_view(kind, n)
    g = view.graph
    chips = np.zeros(g.n_vertices, dtype=np.int64)
    for copy_idx in range(3):
        corners = [g.subcopy_corners(copy_idx)[c]
                   for c in rule["corners"][copy_idx]]
        amap = g.affine_map(n - 1, *corners)
        chips[amap] = sub.chips
    h = g.side // 2
    junctions = {
        "bottom": g.vertex_index(h, 0),   # cut point on the bottom edge
        "left": g.vertex_index(0, h),     # cut point on the left edge
        "mid": g.vertex_index(h, h),      # midpoint of the far side
    }
    for name, value in rule["junctions"].items():
        chips[junctions[name]] = value
    chips[list(view.sinks)] = 0
    return SandpileConfig(view, chips)


# ---------------------------------------------------------------------------
# Boundary batching (the engine behind hierarchical growth)
# ---------------------------------------------------------------------------

def batch_topple_boundary(host_chips, host_odometer, host, sub_level, rounds,
                          check_recurrent=True):
    """Perform `rounds` simultaneous full-subgraph topplings at level `sub_level`.

    host_chips/host_odometer are full vectors on the `host` graph, whose
    bottom-left level-`sub_level` copy holds a recurrent interior with paused
    chips at its two far corners.  Each round topples both corners once plus
    every interior vertex once; the interior configuration is unchanged,
    each corner loses a net 2 chips, and each of the corner's two outside
    neighbors gains 1 chip per round.

    Returns False (and performs nothing) if the interior fails the burning
    test, in which case the caller must fall back to ordinary toppling.
    """
    if rounds < 0:
        raise UsageError("rounds must be >= 0")
    if rounds == 0:
        return True
    s = 1 << sub_level
    cx = host.vertex_index(s, 0)
    cy = host.vertex_index(0, s)
    inner = host.affine_map(sub_level, (0, 0), (s, 0), (0, s))
    inner_mask = np.zeros(host.n_vertices, dtype=bool)
    inner_mask[inner] = True
    inner_mask[cx] = inner_mask[cy] = False

    if host_chips[cx] < 2 * rounds + 2 or host_chips[cy] < 2 * rounds + 2:
        raise UsageError("not enough paused chips for the requested rounds")

    if check_recurrent:
        sink_mask = np.zeros(host.n_vertices, dtype=bool)
        sink_mask[cx] = sink_mask[cy] = True
        keep = np.zeros(host.n_vertices, dtype=bool)
        keep[inner] = True
        keep[cx] = keep[cy] = True
        sub_chips = np.where(keep, host_chips, 0)
        if not _kernels.burning_test(host.indptr, host.indices, host.deg,
                                     sub_chips, sink_mask | ~keep):
            return False

    for corner in (cx, cy):
        outside = [w for w in host.neighbors(corner) if not inner_mask[w]]
        assert len(outside) == 2
        host_chips[corner] -= 4 * rounds
        host_chips[outside[0]] += rounds
        host_chips[outside[1]] += rounds
        host_odometer[corner] += rounds
    # the interior sweep: every interior vertex fires `rounds` times and the
    # configuration is restored, except each corner gets 2*rounds back
    host_odometer[inner_mask] += rounds
    host_chips[cx] += 2 * rounds
    host_chips[cy] += 2 * rounds
    return True


# ---------------------------------------------------------------------------
# Identity / toppling verification suites
# ---------------------------------------------------------------------------

def verify_toppling_identities(n, n_random=5, seed=0):
    """Check the mass-periodicity identities at level n.

    On the corner-sinked graph: eta (+) (2*3^n) 1_o = eta with 3^n absorbed
    per sink.  On the origin-sinked graph: eta (+) 3^n (1_x + 1_y) = eta and
    eta (+) 3^(n+1) 1_x = eta (likewise for y).  Samples the identity tile
    plus `n_random` random recurrent configurations per view.
    """
    rng = np.random.default_rng(seed)
    report = {"level": n, "checks": [], "ok": True}

    view_s = _corner_sinked(n)
    g = view_s.graph
    samples_s = [("e_n", tile("e", n))] + [
        (f"random#{k}", random_recurrent(view_s, rng)) for k in range(n_random)
    ]
    for name, eta in samples_s:
        res = add_and_stabilize(eta, {g.o: 2 * 3**n})
        out = res.final.copy()
        absorbed = res.sink_absorbed()
        out.chips[list(view_s.sinks)] = 0
        ok = out.equals(eta) and all(v == 3**n for v in absorbed.values())
        report["checks"].append(
            {"view": "corner-sinked", "sample": name,
             "identity": "eta + (2*3^n) 1_o", "ok": bool(ok),
             "absorbed": {str(k): v for k, v in absorbed.items()}})
        report["ok"] &= ok

    view_o = _origin_sinked(n)
    go = view_o.graph
    samples_o = [("e_n_o", tile("e_o", n))] + [
        (f"random#{k}", random_recurrent(view_o, rng)) for k in range(n_random)
    ]
    additions = [
        ("eta + 3^n (1_x + 1_y)", {go.x: 3**n, go.y: 3**n}),
        ("eta + 3^(n+1) 1_x", {go.x: 3 ** (n + 1)}),
        ("eta + 3^(n+1) 1_y", {go.y: 3 ** (n + 1)}),
    ]
    for name, eta in samples_o:
        for label, add in additions:
            res = add_and_stabilize(eta, add)
            out = res.final.copy()
            out.chips[list(view_o.sinks)] = 0
            ok = out.equals(eta)
            report["checks"].append(
                {"view": "origin-sinked", "sample": name, "identity": label,
                 "ok": bool(ok),
                 "absorbed": {str(k): v for k, v in res.sink_absorbed().items()}})
            report["ok"] &= ok
    return report
