"""Dynamical invariants of Newton maps.

Critical orbits, kneading data, iterated preimage graphs of root basins, and
an empirical census of hyperbolicity across centered polynomial families.
"""

__version__ = "0.1.0"

from .algebra import AffineMap, Polynomial, RootSet, find_roots, from_roots, normalize
from .errors import NewtonDynError

__all__ = [
    "AffineMap",
    "Polynomial",
    "RootSet",
    "find_roots",
    "from_roots",
    "normalize",
    "NewtonDynError",
    "__version__",
]
