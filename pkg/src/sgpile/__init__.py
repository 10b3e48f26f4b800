"""Laplacian growth models on Sierpinski gasket graphs.

Four single-source models launched from the corner vertex o: the abelian
sandpile, rotor-router aggregation, the divisible sandpile, and internal
DLA, together with the exact radial-jump theory of the sandpile cluster.
"""

from .gasket import GasketGraph, build_gasket
from .sandpile import (SandpileConfig, add_and_stabilize, identity,
                       is_recurrent, oplus, stabilize, tile)

__version__ = "0.1.0"

__all__ = [
    "GasketGraph",
    "build_gasket",
    "SandpileConfig",
    "stabilize",
    "add_and_stabilize",
    "oplus",
    "identity",
    "is_recurrent",
    "tile",
    "__version__",
]
