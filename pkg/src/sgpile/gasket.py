"""Level-n Sierpinski gasket graphs and their metric/boundary structure.

Vertices are addressed by exact integer lattice pairs (i, j): the planar
position is i*(1,0) + j*(1/2, sqrt(3)/2).  The one-sided level-n graph lives
in the triangle {i >= 0, j >= 0, i + j <= 2^n} with corners

    o = (0, 0)      origin / source vertex
    x = (2^n, 0)    bottom-right corner
    y = (0, 2^n)    top corner

The two-sided graph glues a mirrored copy (reflection about the vertical
axis through o) onto the one-sided graph at o; mirrored vertices keep their
pre-image coordinates plus a flag.  Gluing by coordinate dedup means shared
corners between sub-triangles are identified exactly, with no special cases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, UsageError

MAX_LEVEL = 12  # one-sided |V| at 12 is ~800k; plenty for everything here

_SHIFT = 14  # bits per coordinate in packed vertex keys


def _pack(flag, i, j):
    return (np.int64(flag) << np.int64(2 * _SHIFT)) | (np.int64(i) << np.int64(_SHIFT)) | np.int64(j)


def _pack_arr(flag, i, j):
    return (
        (flag.astype(np.int64) << np.int64(2 * _SHIFT))
        | (i.astype(np.int64) << np.int64(_SHIFT))
        | j.astype(np.int64)
    )


def _unpack_arr(keys):
    j = keys & np.int64((1 << _SHIFT) - 1)
    i = (keys >> np.int64(_SHIFT)) & np.int64((1 << _SHIFT) - 1)
    flag = keys >> np.int64(2 * _SHIFT)
    return flag.astype(np.int8), i.astype(np.int32), j.astype(np.int32)


def _one_sided_edges(level):
    """Edge list of the one-sided level-n graph as (i1, j1, i2, j2) arrays.

    Built by recursive triplication: three translated copies of the level
    (n-1) edge set, deduplicated (copies share no edges, only corners, but
    the unique() keeps the construction order-insensitive).
    """
    e = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 1]], dtype=np.int32)
    for k in range(level):
        s = 1 << k
        shifted_i = e.copy()
        shifted_i[:, [0, 2]] += s
        shifted_j = e.copy()
        shifted_j[:, [1, 3]] += s
        e = np.concatenate([e, shifted_i, shifted_j])
        e = np.unique(e, axis=0)
    return e


@dataclass(frozen=True)
class BallSpec:
    """Metric ball B_o(r) together with its inner boundary."""

    radius: int
    members: np.ndarray        # vertex indices, sorted
    inner_boundary: np.ndarray  # subset of members with a neighbor outside

    @property
    def size(self):
        return len(self.members)

    @property
    def boundary_size(self):
        return len(self.inner_boundary)

    def bbar(self):
        """|B_r| - |inner boundary|/2 (an integer for every r >= 1)."""
        twice = 2 * self.size - self.boundary_size
        if twice % 2 != 0:
            raise AssertionError(f"bbar not an integer at r={self.radius}")
        return twice // 2


class GasketGraph:
    """Immutable level-n gasket graph with cached distances from o."""

    def __init__(self, level, sided="one"):
        if level < 0:
            raise UsageError("level must be >= 0")
        if level > MAX_LEVEL:
            raise CapacityError(
                f"level {level} exceeds the supported maximum {MAX_LEVEL}"
            )
        if sided not in ("one", "two"):
            raise UsageError("sided must be 'one' or 'two'")
        self.level = level
        self.sided = sided
        self.side = 1 << level

        e = _one_sided_edges(level)
        flag0 = np.zeros(len(e), dtype=np.int8)
        u = _pack_arr(flag0, e[:, 0], e[:, 1])
        v = _pack_arr(flag0, e[:, 2], e[:, 3])
        if sided == "two":
            # mirrored copy keeps (i, j) and sets the flag; o stays shared
            mf1 = np.where((e[:, 0] == 0) & (e[:, 1] == 0), 0, 1).astype(np.int8)
            mf2 = np.where((e[:, 2] == 0) & (e[:, 3] == 0), 0, 1).astype(np.int8)
            u = np.concatenate([u, _pack_arr(mf1, e[:, 0], e[:, 1])])
            v = np.concatenate([v, _pack_arr(mf2, e[:, 2], e[:, 3])])

        keys = np.unique(np.concatenate([u, v]))
        self._keys = keys
        self.n_vertices = len(keys)
        self.flag, self.i, self.j = _unpack_arr(keys)

        ui = np.searchsorted(keys, u).astype(np.int32)
        vi = np.searchsorted(keys, v).astype(np.int32)
        self.n_edges = len(ui)
        self.edge_u = ui
        self.edge_v = vi

        # symmetric CSR adjacency
        heads = np.concatenate([ui, vi])
        tails = np.concatenate([vi, ui])
        order = np.lexsort((tails, heads))
        heads, tails = heads[order], tails[order]
        self.deg = np.bincount(heads, minlength=self.n_vertices).astype(np.int32)
        self.indptr = np.zeros(self.n_vertices + 1, dtype=np.int64)
        np.cumsum(self.deg, out=self.indptr[1:])
        self.indices = tails.astype(np.int32)

        self.o = int(np.searchsorted(keys, _pack(0, 0, 0)))
        self.x = int(np.searchsorted(keys, _pack(0, self.side, 0)))
        self.y = int(np.searchsorted(keys, _pack(0, 0, self.side)))
        self.corners = (self.o, self.x, self.y)

        self.dist = self._bfs_from(self.o)
        self._ring_cache = {}

    # -- construction helpers -------------------------------------------------

    def _gather_neighbors(self, verts):
        counts = self.deg[verts].astype(np.int64)
        if counts.sum() == 0:
            return np.empty(0, dtype=np.int32)
        cum = np.cumsum(counts)
        pos = np.arange(cum[-1], dtype=np.int64)
        owner = np.searchsorted(cum, pos, side="right")
        offset = pos - (cum[owner] - counts[owner])
        return self.indices[self.indptr[verts[owner]] + offset]

    def _bfs_from(self, source):
        dist = np.full(self.n_vertices, -1, dtype=np.int32)
        dist[source] = 0
        frontier = np.array([source], dtype=np.int32)
        d = 0
        while len(frontier):
            d += 1
            nbrs = self._gather_neighbors(frontier)
            nbrs = np.unique(nbrs[dist[nbrs] < 0])
            dist[nbrs] = d
            frontier = nbrs.astype(np.int32)
        if (dist < 0).any():
            raise AssertionError("graph is not connected")
        return dist

    # -- lookups ---------------------------------------------------------------

    def vertex_index(self, i, j, flag=0):
        """Index of the vertex with lattice coordinates (i, j); -1 if absent."""
        key = _pack(flag, i, j)
        pos = int(np.searchsorted(self._keys, key))
        if pos < len(self._keys) and self._keys[pos] == key:
            return pos
        return -1

    def neighbors(self, v):
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def positions(self):
        """Planar coordinates of every vertex (mirrored copies get x < 0)."""
        px = self.i + 0.5 * self.j
        px = np.where(self.flag == 1, -px, px)
        py = self.j * (np.sqrt(3.0) / 2.0)
        return px, py

    # -- metric structure --------------------------------------------------------

    def ball(self, r):
        """Closed metric ball B_o(r) with its inner boundary."""
        if r < 0 or r > self.side:
            raise UsageError(f"radius {r} outside [0, {self.side}]")
        inside = self.dist <= r
        members = np.nonzero(inside)[0].astype(np.int32)
        has_outside = np.logical_or.reduceat(~inside[self.indices],
                                             self.indptr[:-1])
        bnd = np.nonzero(inside & has_outside)[0].astype(np.int32)
        return BallSpec(r, members, bnd)

    def sphere(self, r):
        if r not in self._ring_cache:
            self._ring_cache[r] = np.nonzero(self.dist == r)[0].astype(np.int32)
        return self._ring_cache[r]

    def ring_sizes(self):
        return np.bincount(self.dist, minlength=self.side + 1)

    def bbar(self, r):
        return self.ball(r).bbar()

    # -- sinked views -----------------------------------------------------------

    def sinked_view(self, sink="corners_xy"):
        if sink in ("corners_xy", "corners", "s"):
            sinks = [self.x, self.y]
            if self.sided == "two":
                sinks += [
                    self.vertex_index(self.side, 0, 1),
                    self.vertex_index(0, self.side, 1),
                ]
        elif sink in ("origin", "o"):
            sinks = [self.o]
        elif sink == "corners_all":
            sinks = [self.o, self.x, self.y]
            if self.sided == "two":
                sinks += [
                    self.vertex_index(self.side, 0, 1),
                    self.vertex_index(0, self.side, 1),
                ]
        elif sink == "none":
            sinks = []
        else:
            raise UsageError(f"unknown sink spec {sink!r}")
        key = tuple(sorted(sinks))
        if not hasattr(self, "_view_cache"):
            self._view_cache = {}
        if key not in self._view_cache:
            self._view_cache[key] = SinkedGraphView(self, key)
        return self._view_cache[key]

    # -- export -------------------------------------------------------------------

    def export_csv(self, fh):
        """Write the edge list: one `i1,j1,i2,j2` line per edge.

        Mirrored vertices of the two-sided graph are exported with the signed
        convention i' = -i-j (their true lattice coordinate), which keeps the
        four-column schema while staying invertible.
        """
        fh.write(f"# level={self.level} sided={self.sided}\n")
        fi, fj, ff = self.i, self.j, self.flag

        def signed(v):
            if ff[v]:
                return -int(fi[v]) - int(fj[v]), int(fj[v])
            return int(fi[v]), int(fj[v])

        for u, v in zip(self.edge_u, self.edge_v):
            a = signed(u)
            b = signed(v)
            fh.write(f"{a[0]},{a[1]},{b[0]},{b[1]}\n")

    # -- sub-triangle placement ---------------------------------------------------

    def affine_map(self, sub_level, p0, p1, p2):
        """Index map embedding a level-`sub_level` graph into this one.

        p0, p1, p2 are the (i, j) images of the sub-graph's corners o, x, y.
        Returns an int array `m` with m[k] = index in self of vertex k of the
        level-`sub_level` graph.
        """
        small = build_gasket(sub_level, "one")
        L = small.side
        u = ((p1[0] - p0[0]) // L, (p1[1] - p0[1]) // L)
        v = ((p2[0] - p0[0]) // L, (p2[1] - p0[1]) // L)
        if (u[0] * L + p0[0] != p1[0] or u[1] * L + p0[1] != p1[1]
                or v[0] * L + p0[0] != p2[0] or v[1] * L + p0[1] != p2[1]):
            raise UsageError("sub-triangle corners are not lattice-compatible")
        ii = p0[0] + small.i * u[0] + small.j * v[0]
        jj = p0[1] + small.i * u[1] + small.j * v[1]
        keys = _pack_arr(np.zeros(len(ii), dtype=np.int8),
                         ii.astype(np.int64), jj.astype(np.int64))
        pos = np.searchsorted(self._keys, keys)
        if (pos >= len(self._keys)).any() or (self._keys[pos] != keys).any():
            raise UsageError("sub-triangle does not fit inside the graph")
        return pos.astype(np.int32)

    def subcopy_corners(self, which):
        """Corner images (o, x, y) of the three level-(n-1) copies."""
        h = self.side // 2
        L = self.side
        if which == 0:    # bottom-left, contains o
            return (0, 0), (h, 0), (0, h)
        if which == 1:    # bottom-right, contains x
            return (h, 0), (L, 0), (h, h)
        if which == 2:    # top, contains y
            return (0, h), (h, h), (0, L)
        raise UsageError("copy index must be 0, 1, or 2")

    def __repr__(self):
        return (f"GasketGraph(level={self.level}, sided={self.sided!r}, "
                f"|V|={self.n_vertices}, |E|={self.n_edges})")


@dataclass(frozen=True)
class SinkedGraphView:
    """A gasket graph with a designated absorbing sink set.

    Chips falling onto a sink stay there and are counted, never fired; the
    interior dynamics is that of the Dirichlet Laplacian (diagonal -deg at
    every non-sink vertex).
    """

    graph: GasketGraph
    sinks: tuple
    sink_mask: np.ndarray = field(init=False, repr=False)
    nonsink: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mask = np.zeros(self.graph.n_vertices, dtype=bool)
        mask[list(self.sinks)] = True
        object.__setattr__(self, "sink_mask", mask)
        object.__setattr__(self, "nonsink",
                           np.nonzero(~mask)[0].astype(np.int32))

    @property
    def n_nonsink(self):
        return len(self.nonsink)

    def laplacian_apply(self, u):
        """Dirichlet Laplacian applied to an integer vector on all vertices.

        u must vanish on sinks; the result at a sink is the inflow (useful
        for absorption accounting), at a non-sink it is (A u)(v) - deg(v)u(v).
        """
        g = self.graph
        out = np.zeros(g.n_vertices, dtype=u.dtype)
        for v in range(g.n_vertices):
            nb = g.indices[g.indptr[v]:g.indptr[v + 1]]
            out[v] = u[nb].sum()
            if not self.sink_mask[v]:
                out[v] -= g.deg[v] * u[v]
        return out


_GRAPH_CACHE = {}


def build_gasket(level, sided="one"):
    """Construct (and cache) the level-n gasket graph."""
    key = (level, sided)
    if key not in _GRAPH_CACHE:
        _GRAPH_CACHE[key] = GasketGraph(level, sided)
    return _GRAPH_CACHE[key]


def expected_vertex_count(level, sided="one"):
    one = 3 * (3**level + 1) // 2
    return one if sided == "one" else 2 * one - 1


def expected_edge_count(level, sided="one"):
    one = 3 ** (level + 1)
    return one if sided == "one" else 2 * one
