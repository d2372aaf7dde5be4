"""Renormalisation-group flows, lattice Green functions and Monte Carlo oracles
for the four-dimensional n-component |phi|^4 model and weakly self-avoiding walk."""

from .lattice import ScaleGeometry, TorusLattice, coalescence_scale, laplacian_apply, mass_scale

__version__ = "0.1.0"

__all__ = [
    "ScaleGeometry",
    "TorusLattice",
    "coalescence_scale",
    "laplacian_apply",
    "mass_scale",
    "__version__",
]
