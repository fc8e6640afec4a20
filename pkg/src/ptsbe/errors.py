"""Exception types shared across the package."""


class SimulationError(Exception):
    """Base class for all errors raised by this package."""


class NetworkStructureError(SimulationError):
    """A tensor network or contraction step is structurally invalid
    (mismatched bond dimensions, dangling bonds, bad slot references)."""


class IncompletePathError(NetworkStructureError):
    """A contraction path did not reduce the network to a single tensor."""


class CapacityError(SimulationError):
    """Input exceeds a hard size cap (optimal planner, exact oracles)."""


class ResourceLimitError(SimulationError):
    """A run tripped a resource guard: intermediate-tensor ceiling or
    wall-clock deadline."""


class PathCacheError(SimulationError):
    """A cached path failed structural validation against a network that
    shares its signature.  Indicates cache corruption; should never happen."""


class ImpossiblePrefixError(SimulationError):
    """A conditional marginal has numerically vanishing total mass, i.e. the
    requested measurement prefix has probability ~0."""


class NumericalError(SimulationError):
    """A numerical invariant was violated beyond tolerance (e.g. a marginal
    diagonal entry below -1e-12)."""
