"""Monte Carlo engines and exact small-lattice oracles."""

from .phi4 import Phi4Estimates, phi4_energy, phi4_mc, phi4_onesite_oracle
from .representation import RepresentationReport, representation_check
from .walks import WalkPath, intersection_local_time, star_mc, watermelon_mc
from .wick import skeleton_tail_bound, wick_permanent, wsaw_tiny_oracle

__all__ = [
    "Phi4Estimates",
    "RepresentationReport",
    "WalkPath",
    "intersection_local_time",
    "phi4_energy",
    "phi4_mc",
    "phi4_onesite_oracle",
    "representation_check",
    "skeleton_tail_bound",
    "star_mc",
    "watermelon_mc",
    "wick_permanent",
    "wsaw_tiny_oracle",
]
