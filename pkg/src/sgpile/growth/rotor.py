"""Rotor-router aggregation and the abelian-stack odometer algorithm.

A rotor mechanism assigns each vertex a cyclic order over its neighbors
(simple: each neighbor exactly once per period).  A walker at an occupied
vertex first advances the rotor, then steps to the neighbor it points at;
it settles at the first unoccupied vertex.

The stack picture: the k-th chip fired from v travels along the k-th rotor
of v's cycle after the initial position, so the number of chips sent along
edge e in the first n firings is

    R(e, n) = floor((n + deg - j(e)) / deg),

with j(e) the position of e in the cycle relative to the initial rotor.
The stack Laplacian of an integer function u is
(L_rho u)(x) = sum over in-edges e of R(e, u(source(e))) - u(x);
firing every vertex v exactly u(v) times turns sigma into sigma + L_rho u.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import UsageError
from ..gasket import build_gasket
from .outcome import GrowthOutcome, radii_of
from .rng import run_generator

MECHANISMS = ("cw", "ccw", "random")


def make_mechanism(graph, name, seed=None):
    """Per-vertex cyclic neighbor order, flattened into CSR layout.

    cw / ccw sort each vertex's neighbors by planar angle (clockwise /
    counter-clockwise); 'random' draws an independent uniform permutation
    per vertex from the seeded stream.
    """
    px, py = graph.positions()
    targets = np.empty_like(graph.indices)
    rng = run_generator(seed if seed is not None else 0) if name == "random" else None
    if name == "random" and seed is None:
        raise UsageError("random mechanism needs a seed")
    for v in range(graph.n_vertices):
        lo, hi = graph.indptr[v], graph.indptr[v + 1]
        nb = graph.indices[lo:hi]
        if name in ("cw", "ccw"):
            ang = np.arctan2(py[nb] - py[v], px[nb] - px[v])
            order = np.argsort(ang, kind="stable")
            if name == "cw":
                order = order[::-1]
            targets[lo:hi] = nb[order]
        elif name == "random":
            targets[lo:hi] = nb[rng.permutation(hi - lo)]
        else:
            raise UsageError(f"unknown mechanism {name!r}")
    return targets


@dataclass
class RotorSystem:
    """Rotor state: mechanism (cyclic neighbor order) + current positions."""

    graph: object
    mechanism_name: str
    targets: np.ndarray     # CSR-flattened cyclic neighbor order
    positions: np.ndarray   # current top-of-stack index per vertex

    @classmethod
    def build(cls, graph, mechanism="cw", seed=None, random_positions=False):
        targets = make_mechanism(graph, mechanism, seed)
        if random_positions:
            if seed is None:
                raise UsageError("random initial rotors need a seed")
            rng = run_generator(seed, run_index=1)
            pos = (rng.random(graph.n_vertices)
                   * graph.deg).astype(np.int64)
        else:
            pos = np.zeros(graph.n_vertices, dtype=np.int64)
        return cls(graph, mechanism, targets, pos.astype(np.int64))

    def copy(self):
        return RotorSystem(self.graph, self.mechanism_name,
                           self.targets, self.positions.copy())

    def cycle_edges(self, v):
        """Neighbors of v in firing order (the rotor cycle starting after
        the initial position)."""
        lo, hi = self.graph.indptr[v], self.graph.indptr[v + 1]
        d = hi - lo
        p0 = self.positions[v]
        return [int(self.targets[lo + (p0 + 1 + k) % d]) for k in range(d)]

    def r_count(self, v, w, n):
        """R((v,w), n): chips sent from v to w within the first n firings."""
        lo, hi = self.graph.indptr[v], self.graph.indptr[v + 1]
        d = hi - lo
        p0 = int(self.positions[v])
        slot = None
        for k in range(lo, hi):
            if self.targets[k] == w:
                slot = k - lo
                break
        if slot is None:
            raise UsageError("w is not a neighbor of v")
        j = (slot - p0) % d
        if j == 0:
            j = d
        return (n + d - j) // d if n >= 0 else 0

    def top_target(self, v, u_v):
        """Target of the rotor on top after u_v firings of v."""
        lo, hi = self.graph.indptr[v], self.graph.indptr[v + 1]
        d = hi - lo
        return int(self.targets[lo + (self.positions[v] + u_v) % d])


def stack_laplacian(rotors, u):
    """(L_rho u)(x) for an integer odometer u (vector over all vertices)."""
    g = rotors.graph
    out = -u.astype(np.int64).copy()
    for v in range(g.n_vertices):
        n = int(u[v])
        if n <= 0:
            continue
        lo, hi = g.indptr[v], g.indptr[v + 1]
        d = hi - lo
        p0 = int(rotors.positions[v])
        base = n // d
        rem = n % d
        for k in range(lo, hi):
            j = (k - lo - p0) % d
            if j == 0:
                j = d
            out[rotors.targets[k]] += base + (1 if j <= rem else 0)
    return out


def rotor_router(m, rotors, host=None, scheduler="direct"):
    """Rotor-router aggregation of m walkers from o.

    scheduler='direct' walks particles one at a time; 'stack' processes an
    abelian chip pool in sweeps (order-independence check).  The rotor
    state in `rotors` is consumed (advanced in place).
    """
    if m < 0:
        raise UsageError("m must be >= 0")
    g = rotors.graph
    occupied = np.zeros(g.n_vertices, dtype=np.uint8)
    fired = np.zeros(g.n_vertices, dtype=np.int64)
    if scheduler == "direct":
        _kernels.rotor_aggregate(g.indptr, rotors.targets, rotors.positions,
                                 occupied, fired, g.o, m)
    elif scheduler == "stack":
        chips = np.zeros(g.n_vertices, dtype=np.int64)
        chips[g.o] = m
        order = np.argsort(g.dist, kind="stable").astype(np.int64)
        _kernels.rotor_aggregate_parallel(g.indptr, rotors.targets,
                                          rotors.positions, occupied, fired,
                                          chips, order)
    else:
        raise UsageError(f"unknown scheduler {scheduler!r}")
    mask = occupied.astype(bool)
    cluster = np.nonzero(mask)[0]
    out_r, in_r = radii_of(g, mask) if m > 0 else (-1, -1)
    return GrowthOutcome(
        model="rotor", m=m, graph=g, cluster=cluster,
        radius=out_r, in_radius=in_r, final=occupied,
        odometer=fired, fired=np.nonzero(fired > 0)[0],
        extra={"mechanism": rotors.mechanism_name, "scheduler": scheduler},
    )


def friedrich_levine(m, rotors, u1=None, max_passes=10**6):
    """Exact abelian-stack odometer via approximate-then-correct.

    Step 1 applies the stack Laplacian of the approximate odometer u1;
    step 2 fires hills (sigma > 1) and unfires holes (sigma < 0, or
    sigma = 0 with positive odometer), scanning by distance from o until a
    fixed point; step 3 unfires rotor cycles on the odometer's support.
    Returns (final configuration, exact odometer, rotor positions).
    """
    g = rotors.graph
    if u1 is None:
        u1 = np.zeros(g.n_vertices, dtype=np.int64)
    if (np.asarray(u1) < 0).any():
        raise UsageError("approximate odometer must be nonnegative")
    u = u1.astype(np.int64).copy()
    sigma = np.zeros(g.n_vertices, dtype=np.int64)
    sigma[g.o] = m
    sigma = sigma + stack_laplacian(rotors, u)

    # Annihilation runs in two exhaustive phases.  Interleaving fires with
    # unfires can cycle (a surplus chip and a deficit chasing each other
    # around a rotor loop), but phased processing terminates: unfiring a
    # hole never creates a hill, firing a hill never creates a hole, and
    # sigma = sigma0 + L_rho u forces every hole to have u > 0, so the
    # hole phase strictly shrinks sum(u) and the hill phase is plain rotor
    # aggregation.
    order = np.argsort(g.dist, kind="stable")
    for _ in range(max_passes):      # holes: unfire to exhaustion
        changed = False
        for v in order:
            while sigma[v] < 0 or (sigma[v] == 0 and u[v] > 0):
                assert u[v] > 0, "hole with zero odometer (inconsistent state)"
                w = rotors.top_target(v, u[v])
                u[v] -= 1
                sigma[w] -= 1
                sigma[v] += 1
                changed = True
        if not changed:
            break
    else:
        raise AssertionError("hole phase exceeded its pass budget")

    for _ in range(max_passes):      # hills: fire to exhaustion
        changed = False
        for v in order:
            while sigma[v] > 1:
                u[v] += 1
                w = rotors.top_target(v, u[v])
                sigma[v] -= 1
                sigma[w] += 1
                changed = True
        if not changed:
            break
    else:
        raise AssertionError("hill phase exceeded its pass budget")

    # reverse cycle-popping: unfire rotor cycles within supp(u)
    while True:
        cyc = _find_cycle(g, rotors, u)
        if cyc is None:
            break
        for v in cyc:
            u[v] -= 1

    _assert_lap_certificate(g, rotors, m, u, sigma)
    final_pos = (rotors.positions + u) % g.deg
    return sigma, u, final_pos


def _find_cycle(g, rotors, u):
    """A rotor-successor cycle inside supp(u), or None."""
    state = np.zeros(g.n_vertices, dtype=np.int8)  # 0 new, 1 on path, 2 done
    for start in np.nonzero(u > 0)[0]:
        if state[start]:
            continue
        path = []
        v = int(start)
        while True:
            if u[v] <= 0 or state[v] == 2:
                for w in path:
                    state[w] = 2
                break
            if state[v] == 1:
                k = path.index(v)
                return path[k:]
            state[v] = 1
            path.append(v)
            v = rotors.top_target(v, int(u[v]))
    return None


def _assert_lap_certificate(g, rotors, m, u, sigma):
    sigma0 = np.zeros(g.n_vertices, dtype=np.int64)
    sigma0[g.o] = m
    check = sigma0 + stack_laplacian(rotors, u)
    assert np.array_equal(check, sigma), "stack Laplacian identity violated"
    assert (sigma <= 1).all(), "final configuration not <= 1"
    support = u > 0
    assert (sigma[support] == 1).all(), "sigma != 1 on the odometer support"
    assert _find_cycle(g, rotors, u) is None, "rotor cycle left on support"
