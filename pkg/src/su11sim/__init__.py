"""Numerical simulator for spatially multimode SU(1,1) interferometers."""

__version__ = "0.1.0"

from .qgrid import Grid, Kernel  # noqa: E402
from .dispersion import CrystalGeometry, OpticalModel  # noqa: E402
from .gsolver import SolverSettings, TransferPair  # noqa: E402

__all__ = ["Grid", "Kernel", "OpticalModel", "CrystalGeometry", "SolverSettings", "TransferPair", "__version__"]
