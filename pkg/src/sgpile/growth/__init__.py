"""Single-source growth models launched from the corner vertex o."""

from .outcome import GrowthOutcome
from .sandpile_growth import sandpile_growth, host_level_for_mass
from .divisible import divisible_sandpile, divisible_odometer_exact
from .rotor import (RotorSystem, make_mechanism, rotor_router,
                    friedrich_levine, stack_laplacian)
from .idla import idla, idla_ensemble, h_function
from .rng import run_generator

__all__ = [
    "GrowthOutcome",
    "sandpile_growth",
    "host_level_for_mass",
    "divisible_sandpile",
    "divisible_odometer_exact",
    "RotorSystem",
    "make_mechanism",
    "rotor_router",
    "friedrich_levine",
    "stack_laplacian",
    "idla",
    "idla_ensemble",
    "h_function",
    "run_generator",
]
