"""Gluing rules for assembling level-(n+1) tiles from three level-n tiles.

Each rule gives, per sub-triangle copy (0 = bottom-left, 1 = bottom-right,
2 = top), the permutation mapping the tile's own corners (o, x, y) onto the
copy's physical corners, plus the chip values at the three junction vertices
(bottom cut point, left cut point, midpoint of the far side).

The rules were extracted numerically from the defining stabilizations and
are locked against them in tests/test_tiles.py:

* e:    bottom-left copy sits identically (the nesting property); the two
        upper copies have their origin at the far midpoint.  Cut points
        carry 3, the far midpoint 0.
* M:    all three copies identity-oriented (each upper copy emanates from
        its cut point).  Cut points carry 3, the far midpoint 2.
* zeta: the half-tile produced in the upper cells of the mass-(4 2/3)*3^n
        stabilization; identity-oriented with junctions 3 (bottom edge,
        part of the all-3s conduit), 2 (left), 1 (middle).
"""

_RULES = {
    "e": {
        "child": "e",
        "corners": [(0, 1, 2), (2, 0, 1), (1, 0, 2)],
        "junctions": {"bottom": 3, "left": 3, "mid": 0},
    },
    "M": {
        "child": "M",
        "corners": [(0, 1, 2), (0, 1, 2), (0, 1, 2)],
        "junctions": {"bottom": 3, "left": 3, "mid": 2},
    },
    "zeta": {
        "child": "zeta",
        "corners": [(0, 1, 2), (0, 1, 2), (0, 1, 2)],
        "junctions": {"bottom": 3, "left": 2, "mid": 1},
    },
}

# base-case chip tables at level 1, keyed by lattice coordinates (i, j);
# corner vertices are omitted (they belong to the gluing context).
BASE_TABLES = {
    "e": {(1, 0): 3, (0, 1): 3, (1, 1): 0},
    "M": {(1, 0): 3, (0, 1): 3, (1, 1): 2},
    "zeta": {(1, 0): 3, (0, 1): 2, (1, 1): 1},
}


def glue_rule(kind):
    return _RULES[kind]
