"""Exception types shared across the toolkit."""


class PinballError(Exception):
    """Base class for all toolkit errors."""


class BudgetExceededError(PinballError):
    """A Kronecker-structured object would exceed the configured entry cap."""


class SingularSystemError(PinballError):
    """A linear system (Kronecker sum, saddle point, or pencil) is singular."""


class MeshError(PinballError):
    """Mesh file is malformed or violates a structural requirement."""


class ConvergenceError(PinballError):
    """An iterative solver failed to reach its tolerance."""


class EmptyBoxError(PinballError):
    """A sensor box contains no quadrature points."""


class UsageError(PinballError):
    """Bad configuration or command-line input."""
