"""Grid-based numerics for variable-exponent Lebesgue and local Hardy spaces."""

__version__ = "0.1.0"

from .exponent import (
    ExponentField,
    atom_moment_degree,
    build_exponent,
    conjugate,
    log_holder_constants,
    sobolev_shift,
)
from .grid import Cube, Grid, GridFunction, convolve_scaled, integrate, lq_norm, make_grid
from .luxemburg import NormResult, holder_pairing, luxemburg_norm, modular

__all__ = [
    "Cube",
    "ExponentField",
    "Grid",
    "GridFunction",
    "NormResult",
    "atom_moment_degree",
    "build_exponent",
    "conjugate",
    "convolve_scaled",
    "holder_pairing",
    "integrate",
    "log_holder_constants",
    "luxemburg_norm",
    "make_grid",
    "modular",
    "sobolev_shift",
    "__version__",
]
