"""Hot loops for chip-firing, rotor walks, and IDLA.

Everything here operates on flat CSR arrays so the same code runs under
numba (preferred) or as plain Python (fallback when numba is unavailable;
set SGPILE_NO_NUMBA=1 to force it).  All chip counts are int64.
"""

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    if os.environ.get("SGPILE_NO_NUMBA"):
        raise ImportError("numba disabled via SGPILE_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def stabilize(indptr, indices, deg, chips, odometer, may_fire, budget):
    """Multifire work-queue stabilization.

    Vertices with may_fire[v] == False (sinks / frozen regions) accumulate
    chips but never topple.  Each queue visit fires floor(chips/deg) times
    at once.  Returns the number of elementary firings performed, or -1 if
    the budget was exhausted (non-termination guard).
    """
    n = len(deg)
    queue = np.empty(n, dtype=np.int64)
    in_queue = np.zeros(n, dtype=np.uint8)
    head = 0
    tail = 0
    for v in range(n):
        if may_fire[v] and chips[v] >= deg[v]:
            queue[tail] = v
            tail = (tail + 1) % n
            in_queue[v] = 1
    total = 0
    pending = (tail - head) % n
    if in_queue.sum() == n:
        pending = n
    while pending > 0:
        v = queue[head]
        head = (head + 1) % n
        pending -= 1
        in_queue[v] = 0
        d = deg[v]
        t = chips[v] // d
        if t <= 0:
            continue
        chips[v] -= t * d
        odometer[v] += t
        total += t
        if total > budget:
            return -1
        for k in range(indptr[v], indptr[v + 1]):
            w = indices[k]
            chips[w] += t
            if may_fire[w] and chips[w] >= deg[w] and in_queue[w] == 0:
                queue[tail] = w
                tail = (tail + 1) % n
                pending += 1
                in_queue[w] = 1
    return total


@njit(cache=True)
def received_counts(indptr, indices, odometer):
    """Total chips received by each vertex: (A u)(v) for odometer u."""
    n = len(indptr) - 1
    out = np.zeros(n, dtype=np.int64)
    for v in range(n):
        u = odometer[v]
        if u > 0:
            for k in range(indptr[v], indptr[v + 1]):
                out[indices[k]] += u
    return out


@njit(cache=True)
def burning_test(indptr, indices, deg, chips, sink_mask):
    """Dhar burning test: True iff every non-sink vertex burns.

    Burning starts from the sink set; an unburnt vertex burns as soon as its
    chip count is at least its number of unburnt neighbors.
    """
    n = len(deg)
    burnt = np.zeros(n, dtype=np.uint8)
    unburnt_nbrs = deg.astype(np.int64).copy()
    queue = np.empty(n, dtype=np.int64)
    tail = 0
    for v in range(n):
        if sink_mask[v]:
            burnt[v] = 1
            queue[tail] = v
            tail += 1
    head = 0
    nburnt = 0
    while head < tail:
        v = queue[head]
        head += 1
        for k in range(indptr[v], indptr[v + 1]):
            w = indices[k]
            unburnt_nbrs[w] -= 1
            if burnt[w] == 0 and chips[w] >= unburnt_nbrs[w]:
                burnt[w] = 1
                queue[tail] = w
                tail += 1
                nburnt += 1
    for v in range(n):
        if burnt[v] == 0:
            return False
    return True


@njit(cache=True)
def rotor_aggregate(indptr, mech_targets, pos, occupied, fired, start, count):
    """Direct rotor-router aggregation: `count` walkers launched from start.

    mech_targets holds, for vertex v, its neighbors in rotor-cycle order in
    the slice [indptr[v], indptr[v+1]); pos[v] is the index (within the
    cycle) of the rotor currently on top.  Walkers settle at the first
    unoccupied vertex.  Mutates pos/occupied/fired in place.
    """
    for _ in range(count):
        cur = start
        while occupied[cur] == 1:
            d = indptr[cur + 1] - indptr[cur]
            p = pos[cur] + 1
            if p >= d:
                p = 0
            pos[cur] = p
            fired[cur] += 1
            cur = mech_targets[indptr[cur] + p]
        occupied[cur] = 1


@njit(cache=True)
def rotor_aggregate_parallel(indptr, mech_targets, pos, occupied, fired,
                             chips, order):
    """Abelian-stack scheduler for rotor aggregation.

    chips[v] counts unsettled walkers currently at v; vertices are repeatedly
    processed in the supplied scan `order` until no walkers remain.  Used to
    check order-independence against `rotor_aggregate`.
    """
    n = len(chips)
    remaining = np.int64(0)
    for v in range(n):
        remaining += chips[v]
    while remaining > 0:
        for idx in range(n):
            v = order[idx]
            while chips[v] > 0:
                if occupied[v] == 0:
                    occupied[v] = 1
                    chips[v] -= 1
                    remaining -= 1
                else:
                    d = indptr[v + 1] - indptr[v]
                    p = pos[v] + 1
                    if p >= d:
                        p = 0
                    pos[v] = p
                    fired[v] += 1
                    chips[v] -= 1
                    chips[mech_targets[indptr[v] + p]] += 1
                    break  # move on; revisit later (arbitrary legal order)
    return remaining


@njit(cache=True)
def incremental_sweep(indptr, indices, deg, may_fire, dist, o, cut, mmax,
                      ring_sizes, radii, paused, flags):
    """Grow m 1_o one chip at a time, recording per-m observables.

    radii[m] gets the max distance ever reached by a chip (the receiving
    radius); paused[m] gets the chip count at vertex `cut` (a frozen cut
    point / sink) when cut >= 0.  flags accumulates invariant violations:
    flags[0] counts m where the receiving set is not an exact ball,
    flags[1] counts odd m whose avalanche is nonempty or where the origin
    parity is wrong (stable configs at 2k and 2k+1 differ only at o).
    """
    n = len(deg)
    chips = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    in_queue = np.zeros(n, dtype=np.uint8)
    touched = np.zeros(n, dtype=np.uint8)
    prefix = np.zeros(len(ring_sizes), dtype=np.int64)
    acc = np.int64(0)
    for d in range(len(ring_sizes)):
        acc += ring_sizes[d]
        prefix[d] = acc
    touched[o] = 1
    total_touched = np.int64(1)
    r = 0
    for m in range(1, mmax + 1):
        chips[o] += 1
        fired_any = False
        if may_fire[o] and chips[o] >= deg[o]:
            head = 0
            tail = 1
            queue[0] = o
            in_queue[o] = 1
            pending = 1
            while pending > 0:
                v = queue[head]
                head = (head + 1) % n
                pending -= 1
                in_queue[v] = 0
                d = deg[v]
                t = chips[v] // d
                if t <= 0:
                    continue
                chips[v] -= t * d
                fired_any = True
                for k in range(indptr[v], indptr[v + 1]):
                    w = indices[k]
                    chips[w] += t
                    if touched[w] == 0:
                        touched[w] = 1
                        total_touched += 1
                        if dist[w] > r:
                            r = dist[w]
                    if may_fire[w] and chips[w] >= deg[w] and in_queue[w] == 0:
                        queue[tail] = w
                        tail = (tail + 1) % n
                        pending += 1
                        in_queue[w] = 1
        radii[m] = r
        if cut >= 0:
            paused[m] = chips[cut]
        # receiving set an exact ball <=> every touched ring full (touched
        # rings never exceed r by construction)
        if total_touched != prefix[r]:
            flags[0] += 1
        if m % 2 == 1:
            if fired_any or chips[o] != 1:
                flags[1] += 1
        elif chips[o] != 0:
            flags[1] += 1
    return r


@njit(cache=True)
def count_ball_edges(indptr, indices, dist, r):
    """(internal edges of B_o(r), edges leaving B_o(r))."""
    n = len(indptr) - 1
    internal = 0
    cut = 0
    for v in range(n):
        if dist[v] <= r:
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if dist[w] <= r:
                    internal += 1
                else:
                    cut += 1
    return internal // 2, cut


@njit(cache=True)
def idla_run(indptr, indices, occupied, start, count, rand_buf, state):
    """IDLA: `count` random walkers from start, settling when first leaving
    the occupied set.  Consumes uint32 entries of rand_buf one per step
    (degrees are powers of two, so masking is bias-free).

    state = [next_rand_index, particles_already_settled, current_vertex,
    walker_active].  Returns 0 when done, 1 when rand_buf is exhausted and a
    refill is needed (state preserves the walk in progress).
    """
    rpos = state[0]
    done = state[1]
    cur = state[2]
    active = state[3]
    nrand = len(rand_buf)
    while done < count:
        if active == 0:
            cur = start
            active = 1
        while occupied[cur] == 1:
            if rpos >= nrand:
                state[0] = 0
                state[1] = done
                state[2] = cur
                state[3] = active
                return 1
            d = indptr[cur + 1] - indptr[cur]
            r = rand_buf[rpos] & np.uint32(d - 1)
            rpos += 1
            cur = indices[indptr[cur] + r]
        occupied[cur] = 1
        done += 1
        active = 0
    state[0] = rpos
    state[1] = done
    state[2] = cur
    state[3] = 0
    return 0
