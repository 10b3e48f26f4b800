"""Divisible sandpile: continuous mass, excess above 1 split among neighbors.

Mass emitted from a vertex is divided equally among its neighbors (each
receives emitted/deg(emitter)).  The odometer u(x) is the total mass x
emits; the stabilized configuration is sigma = m 1_o + L u where
(L u)(x) = sum_{y~x} u(y)/deg(y) - u(x).

Two arithmetic modes:

* exact  - rational active-set solve of the obstacle problem, certified by
           the fixed-point conditions (sigma = 1 on supp(u), sigma <= 1,
           finite support);
* float  - iterated excess splitting to a tolerance.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from ..errors import SgpileError, UsageError
from ..gasket import build_gasket
from .outcome import GrowthOutcome, radii_of


def ball_index(m):
    """n_m = max{k >= 0 : bbar(k) <= m} on the one-sided gasket."""
    if m < 1:
        return -1
    g = build_gasket(4)
    k = 1
    while True:
        while g.side <= k + 1:
            g = build_gasket(g.level + 1)
        if g.bbar(k) > m:
            return k - 1
        k += 1


def _host_for(m):
    n_m = ball_index(m)
    radius_bound = max(n_m + 2, 2)
    level = 1
    while (1 << level) < radius_bound + 2:
        level += 1
    return build_gasket(level + 1)


def divisible_odometer_exact(m, host=None, max_iter=500):
    """Exact rational odometer of the divisible sandpile started from m 1_o.

    Active-set iteration: solve the mass-balance equations on a candidate
    support A (sigma = 1 on A, u = 0 off A), then move vertices in or out
    until the fixed-point certificate holds.
    """
    m = Fraction(m)
    host = host or _host_for(m)
    o = host.o
    if m <= 1:
        return host, {}, m
    active = {o}
    for _ in range(max_iter):
        u = _solve_dirichlet(host, active, m)
        negative = {v for v, val in u.items() if val <= 0}
        if negative:
            active -= negative
            if not active:
                raise SgpileError("active set collapsed; mass too small?")
            continue
        sigma_excess = _excess_outside(host, u, active, m)
        if sigma_excess:
            active |= sigma_excess
            continue
        return host, u, m
    raise SgpileError("active-set iteration did not converge")


def _solve_dirichlet(host, active, m):
    """Solve sigma = 1 on the active set exactly (u = 0 outside)."""
    verts = sorted(active)
    pos = {v: k for k, v in enumerate(verts)}
    n = len(verts)
    a = [[Fraction(0)] * (n + 1) for _ in range(n)]
    for row, v in enumerate(verts):
        a[row][row] = Fraction(-1)
        rhs = Fraction(1) - (m if v == host.o else 0)
        for w in host.neighbors(v):
            w = int(w)
            if w in pos:
                a[row][pos[w]] += Fraction(1, int(host.deg[w]))
        a[row][n] = rhs
    _gauss(a, n)
    return {v: a[pos[v]][n] for v in verts}


def _gauss(a, n):
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        inv = Fraction(1) / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]


def _excess_outside(host, u, active, m):
    """Vertices off the active set where the final mass would exceed 1."""
    out = set()
    inflow = {}
    for v, val in u.items():
        share = val / int(host.deg[v])
        for w in host.neighbors(v):
            w = int(w)
            if w not in active:
                inflow[w] = inflow.get(w, Fraction(0)) + share
    for w, mass in inflow.items():
        base = m if w == host.o else Fraction(0)
        if base + mass > 1:
            out.add(w)
    return out


def exact_final_mass(host, u, m):
    """sigma = m 1_o + L u as a dict on the support's neighborhood."""
    sigma = {host.o: Fraction(m)}
    for v, val in u.items():
        sigma[v] = sigma.get(v, Fraction(0)) - val
        share = val / int(host.deg[v])
        for w in host.neighbors(v):
            w = int(w)
            sigma[w] = sigma.get(w, Fraction(0)) + share
    return sigma


def _float_stabilize(m, host, tol, max_sweeps):
    mass = np.zeros(host.n_vertices)
    mass[host.o] = float(m)
    u = np.zeros(host.n_vertices)
    inv_deg = 1.0 / host.deg
    owner = np.repeat(np.arange(host.n_vertices), host.deg)
    for _ in range(max_sweeps):
        excess = np.maximum(mass - 1.0, 0.0)
        mx = excess.max()
        if mx < tol:
            return u, mass, mx
        u += excess
        mass -= excess
        share = excess * inv_deg
        np.add.at(mass, host.indices, share[owner])
    raise SgpileError(
        f"float divisible sandpile: residual {mx:.3e} after {max_sweeps} sweeps")


def divisible_sandpile(m, arithmetic="exact", tol=1e-12, max_sweeps=10**7):
    """Run the divisible sandpile from m 1_o; cluster = support of odometer."""
    if m < 0:
        raise UsageError("mass must be >= 0")
    if arithmetic == "exact":
        host, u, m_frac = divisible_odometer_exact(m)
        support = np.array(sorted(u), dtype=np.int64)
        mask = np.zeros(host.n_vertices, dtype=bool)
        mask[support] = True
        out_r, in_r = radii_of(host, mask) if len(support) else (-1, -1)
        if len(support) == 0:
            out_r = in_r = -1
        outcome = GrowthOutcome(
            model="divisible", m=m, graph=host,
            cluster=support, radius=out_r, in_radius=in_r,
            final=exact_final_mass(host, u, m_frac), odometer=u,
            extra={"arithmetic": "exact", "n_m": ball_index(m)},
        )
        return outcome
    if arithmetic == "float":
        host = _host_for(m)
        u, mass, residual = _float_stabilize(m, host, tol, max_sweeps)
        mask = u > 0
        support = np.nonzero(mask)[0]
        out_r, in_r = radii_of(host, mask) if mask.any() else (-1, -1)
        return GrowthOutcome(
            model="divisible", m=m, graph=host,
            cluster=support, radius=out_r, in_radius=in_r,
            final=mass, odometer=u,
            extra={"arithmetic": "float", "residual": float(residual),
                   "n_m": ball_index(m)},
        )
    raise UsageError(f"unknown arithmetic {arithmetic!r}")
