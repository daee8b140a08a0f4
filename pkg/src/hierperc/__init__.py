"""Long-range percolation on the hierarchical lattice at and near criticality."""

__version__ = "0.1.0"

from .errors import HierPercError, InsufficientSamplesError, ParameterError, SolverError
from .geometry import LatticeSpec, TorusSpec
from .kernel import KernelSpec, ModelParams
from .rng import RngPolicy

__all__ = [
    "HierPercError",
    "InsufficientSamplesError",
    "KernelSpec",
    "LatticeSpec",
    "ModelParams",
    "ParameterError",
    "RngPolicy",
    "SolverError",
    "TorusSpec",
    "__version__",
]
