"""Exact radial theory of single-source sandpile growth.

Contents:

* simulation-backed tables: the cluster radius r_m and the per-level paused
  chip counts m'(m) (chips accumulated on the two cut points of the level-n
  triangle when its interior is stabilized first), computed by incremental
  sweeps;
* the piecewise-constant jump map m -> m' (five jump families per
  2*3^n-period, valid from m = 4*3^3 on), in exact integer arithmetic;
* the radius recursion r_m = 2^n + r_{m'-2} built on that map, with a
  simulated base table below 4*3^4;
* the remainder function R(x) = r(x) - 2 r(x/3) in {-1, 0, 1} and the
  log-3-periodic scaling profile evaluated from its renewal series;
* volume-based growth bounds (ball edge counts / minimal toppling mass).

The jump map and recursion are cross-validated against simulation in the
test suite; here they are independent code paths.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import CapacityError, UsageError
from .gasket import build_gasket
from .growth.sandpile_growth import host_level_for_mass, mass_level

D_H = math.log(3) / math.log(2)  # fractal dimension: log 3 / log 2
BASE_LIMIT = 4 * 3**4            # recursion base table covers m < 324


# ---------------------------------------------------------------------------
# Simulation-backed tables
# ---------------------------------------------------------------------------

_SWEEP_CACHE = {}


def radius_sweep(mmax):
    """r_m for all m <= mmax by incremental simulation (cached).

    Also verifies, chip by chip, that the receiving set stays an exact
    metric ball and that odd masses only change the origin.
    """
    cached = _SWEEP_CACHE.get("radius")
    if cached is None or cached["mmax"] < mmax:
        host = build_gasket(host_level_for_mass(mmax))
        may = np.ones(host.n_vertices, dtype=bool)
        may[[host.x, host.y]] = False
        radii = np.zeros(mmax + 1, dtype=np.int64)
        paused = np.zeros(1, dtype=np.int64)
        flags = np.zeros(2, dtype=np.int64)
        _kernels.incremental_sweep(host.indptr, host.indices, host.deg,
                                   may, host.dist, host.o, -1, mmax,
                                   host.ring_sizes().astype(np.int64),
                                   radii, paused, flags)
        cached = {"mmax": mmax, "radii": radii,
                  "ball_violations": int(flags[0]),
                  "parity_violations": int(flags[1])}
        _SWEEP_CACHE["radius"] = cached
    return cached


def paused_sweep(level, mmax):
    """m'(m): chips on each cut point of the level-n triangle, for m <= mmax.

    The interior of the level-n triangle is stabilized with the two far
    corners frozen; by symmetry both corners hold the same count.
    """
    key = ("paused", level)
    cached = _SWEEP_CACHE.get(key)
    if cached is None or cached["mmax"] < mmax:
        g = build_gasket(level)
        may = np.ones(g.n_vertices, dtype=bool)
        may[[g.x, g.y]] = False
        radii = np.zeros(mmax + 1, dtype=np.int64)
        paused = np.zeros(mmax + 1, dtype=np.int64)
        flags = np.zeros(2, dtype=np.int64)
        _kernels.incremental_sweep(g.indptr, g.indices, g.deg, may, g.dist,
                                   g.o, g.x, mmax,
                                   g.ring_sizes().astype(np.int64),
                                   radii, paused, flags)
        cached = {"mmax": mmax, "paused": paused}
        _SWEEP_CACHE[key] = cached
    return cached


def radius_simulated(m):
    """r_m from simulation (sweep table, extended on demand)."""
    if m <= 0:
        return 0
    cached = _SWEEP_CACHE.get("radius")
    if cached is not None and cached["mmax"] >= m:
        return int(cached["radii"][m])
    from .growth.sandpile_growth import sandpile_growth
    return int(sandpile_growth(m, engine="naive", with_trace=False).radius)


def mprime_simulated(m):
    """Paused cut-point count at the fundamental level of m (m >= 12)."""
    if m < 12:
        raise UsageError("the fundamental decomposition needs m >= 12")
    n = mass_level(m)
    sweep = paused_sweep(n, m)
    return int(sweep["paused"][m])


# ---------------------------------------------------------------------------
# The exact jump map m -> m' and the radius recursion
# ---------------------------------------------------------------------------

def b_const(n):
    """b_n = (3/2)(3^(n-1) + 1): vertex count of the level-(n-1) triangle."""
    return 3 * (3 ** (n - 1) + 1) // 2


def jump_points(n):
    """The m' jump locations and values within [4*3^n, 4*3^(n+1)), n >= 3.

    Five families per quarter-period p in {0,1,2,3}:

        m = (4+2p)*3^n      -> m' = b_n + p*3^n
        m = (4+2p)*3^n + 2  -> m' = b_n + 1 + p*3^n
        m = (40+18p)*3^(n-2)-> m' = 2*3^(n-1) + 1 + p*3^n   (the 4 4/9 jump)
        m = (14+6p)*3^(n-1) -> m' = 2*3^(n-1) + 2 + p*3^n   (the 4 2/3 jump)
        m = (16+6p)*3^(n-1) -> m' = 3^n + 1 + p*3^n         (the 5 1/3 jump)
    """
    if n < 3:
        raise UsageError("the jump table is regular only for n >= 3")
    rows = []
    for p in range(4):
        rows.append(((4 + 2 * p) * 3**n, b_const(n) + p * 3**n))
        rows.append(((4 + 2 * p) * 3**n + 2, b_const(n) + 1 + p * 3**n))
        rows.append(((40 + 18 * p) * 3 ** (n - 2),
                     2 * 3 ** (n - 1) + 1 + p * 3**n))
        rows.append(((14 + 6 * p) * 3 ** (n - 1),
                     2 * 3 ** (n - 1) + 2 + p * 3**n))
        rows.append(((16 + 6 * p) * 3 ** (n - 1), 3**n + 1 + p * 3**n))
    rows.sort()
    return rows


def mprime_map(m):
    """The piecewise-constant right-continuous jump map, for m >= 4*3^3."""
    if m < 4 * 27:
        raise UsageError("the jump map is defined for m >= 108")
    n = mass_level(m)
    value = None
    for pt, mp in jump_points(n):
        if pt <= m:
            value = mp
        else:
            break
    assert value is not None
    return value


_RECURSE_CACHE = {}


def radius_recursive(m):
    """r_m via the jump map and r_m = 2^n + r_{m'-2}; base table below 324."""
    if m < 0:
        raise UsageError("mass must be >= 0")
    if m < BASE_LIMIT:
        base = radius_sweep(BASE_LIMIT - 1)["radii"]
        return int(base[m])
    if m in _RECURSE_CACHE:
        return _RECURSE_CACHE[m]
    n = mass_level(m)
    mp = mprime_map(m)
    val = 2**n + radius_recursive(mp - 2)
    _RECURSE_CACHE[m] = val
    return val


def radius(m, via="recurse"):
    """Cluster radius r_m, by exact recursion or by direct simulation."""
    if via == "recurse":
        return radius_recursive(m)
    if via == "simulate":
        return radius_simulated(m)
    raise UsageError(f"unknown radius mode {via!r}")


# ---------------------------------------------------------------------------
# Jump table (measured vs predicted)
# ---------------------------------------------------------------------------

def measured_jump_rows(n):
    """Measured table rows for block n: every m in [4*3^n, 4*3^(n+1)) where
    the paused count m' changes, with (m, m', m-2m', delta_r)."""
    lo, hi = 4 * 3**n, 4 * 3 ** (n + 1)
    sweep = paused_sweep(n, hi - 1)["paused"]
    radii = radius_sweep(hi - 1)["radii"]
    rows = []
    for m in range(lo, hi):
        if sweep[m] != sweep[m - 1]:
            rows.append({
                "n": n, "m": m, "m_prime": int(sweep[m]),
                "retained": int(m - 2 * sweep[m]),
                "delta_r": int(radii[m] - radii[m - 1]),
            })
    return rows


def preperiodic_rows():
    """The two radius jumps below m = 12, with their level-0 paused counts
    (the origin fires floor(m/2) times, so each unit-triangle corner holds
    m//2 chips)."""
    radii = radius_sweep(11)["radii"]
    rows = []
    for m in range(2, 12):
        if radii[m] != radii[m - 1]:
            rows.append({
                "n": 0, "m": m, "m_prime": m // 2,
                "retained": m - 2 * (m // 2),
                "delta_r": int(radii[m] - radii[m - 1]),
            })
    return rows


def predicted_jump_rows(n):
    """Rows predicted by the jump-map formulas (n >= 3)."""
    return [{"n": n, "m": m, "m_prime": mp, "retained": m - 2 * mp}
            for m, mp in jump_points(n)]


def jump_table(n_max, n_min=1, compare=True):
    """Measured jump rows for blocks n_min..n_max; for n >= 3 each row is
    checked against the predicted (m, m') and mismatches are flagged."""
    out = []
    for n in range(n_min, n_max + 1):
        rows = measured_jump_rows(n)
        if compare and n >= 3:
            pred = {r["m"]: r["m_prime"] for r in predicted_jump_rows(n)}
            if len(rows) != len(pred):
                for r in rows:
                    r["match"] = r["m"] in pred
            for r in rows:
                r["match"] = pred.get(r["m"]) == r["m_prime"]
        out.extend(rows)
    return out


# ---------------------------------------------------------------------------
# Remainder function and the log-periodic profile
# ---------------------------------------------------------------------------

def _r_of(x):
    """r(x) = r_floor(x) for nonneg real/rational x, via the recursion."""
    m = int(x)  # floor for nonnegative values
    return radius_recursive(m)


def remainder(x):
    """R(x) = r(x) - 2 r(x/3), always in {-1, 0, 1}."""
    if x < 0:
        raise UsageError("x must be >= 0")
    x = Fraction(x)
    val = _r_of(x) - 2 * _r_of(x / 3)
    if val not in (-1, 0, 1):
        raise AssertionError(
            f"remainder bound violated at x={x}: {val} (implementation bug)")
    return val


def profile_value(x, depth=40):
    """The log-3-periodic limit profile of r(x)/x^(1/d_H).

    Reduces x to its period representative in [1, 3) exactly, then sums the
    renewal series sum_j (3^j x)^(-1/d_H) R(3^j x) to `depth` terms.
    Returns (value, truncation_bound); the tail is bounded by 2^(1-depth)
    since 3^(1/d_H) = 2.
    """
    if depth < 1:
        raise UsageError("depth must be >= 1")
    x = Fraction(x)
    if x <= 0:
        raise UsageError("x must be positive")
    while x >= 3:
        x /= 3
    while x < 1:
        x *= 3
    xf = float(x)
    scale = xf ** (-1.0 / D_H)
    terms = []
    for j in range(depth):
        rj = remainder(3**j * x)
        if rj:
            terms.append(rj * scale * 2.0 ** (-j))
    value = math.fsum(terms)
    bound = scale * 2.0 ** (1 - depth)
    return value, bound


def g_function(x, depth=40):
    """Profile value alone (see profile_value)."""
    return profile_value(x, depth)[0]


# ---------------------------------------------------------------------------
# Volume bounds
# ---------------------------------------------------------------------------

def ball_edge_counts(r, graph=None):
    """(internal edges of B_o(r), edges from B_o(r) to its complement)."""
    g = graph or build_gasket(_level_for_radius(r))
    if r > g.side // 2:
        raise UsageError("ball exceeds the safe interior of the host graph")
    internal, cut = _kernels.count_ball_edges(g.indptr, g.indices,
                                              g.dist.astype(np.int64),
                                              int(r))
    return int(internal), int(cut)


def _level_for_radius(r):
    level = 1
    while (1 << level) < 2 * max(r, 1):
        level += 1
    level += 1
    if level > 12:
        raise CapacityError(f"radius {r} exceeds the supported host size")
    return level


def rossin_minimum_mass(r, graph=None):
    """Minimum chips at o forcing every vertex of B_o(r) to topple:
    internal edge count plus outgoing edge count."""
    internal, cut = ball_edge_counts(r, graph)
    return internal + cut


def growth_bounds(m, r_m=None):
    """Evaluate the volume-based radius bounds at mass m (m >= 12).

    Returns a dict with the two bound ratios, the bound constants, and the
    minimal-toppling count of the ball B_o(r_m - 1) (which can never exceed
    m).  r_m defaults to the exact recursion value.
    """
    if m < 12:
        raise UsageError("bounds are evaluated for m >= 12")
    r = radius_recursive(m) if r_m is None else int(r_m)
    lower_ratio = (r**D_H + 1) / m
    upper_ratio = (r - 1) ** D_H / m
    internal, cut = ball_edge_counts(r - 1)
    return {
        "m": m,
        "r": r,
        "lower_ratio": lower_ratio,
        "lower_bound": 2.0 / 9.0,
        "upper_ratio": upper_ratio,
        "upper_bound": (3.0 / 4.0) ** D_H,
        "rossin_min": internal + cut,
        "inner_edges": internal,
        "ok": bool(lower_ratio >= 2.0 / 9.0
                   and upper_ratio <= (3.0 / 4.0) ** D_H
                   and m >= internal),
    }
