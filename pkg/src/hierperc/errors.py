class HierPercError(Exception):
    """Base class for toolkit errors."""


class ParameterError(HierPercError, ValueError):
    """Invalid model, lattice or sampling parameters."""


class SolverError(HierPercError, RuntimeError):
    """Root finding failed to bracket or converge."""


class InsufficientSamplesError(HierPercError, ValueError):
    pass
