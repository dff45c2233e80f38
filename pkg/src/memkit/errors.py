"""Exception hierarchy shared across the package."""

from __future__ import annotations


class MemkitError(Exception):
    """Base class for all memkit errors."""


class ExprError(MemkitError):
    """Syntax or semantic error in the expression mini-language."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (column {position + 1})"
        super().__init__(message)


class NetlistError(MemkitError):
    """Syntax or semantic error in a netlist."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EvalDomainError(MemkitError):
    """Characteristic evaluation left its domain (division by zero,
    fractional power of a negative base, or a non-finite result)."""


class AssemblyError(MemkitError):
    """The nodal model could not be assembled or evaluated."""


class IllPosedError(MemkitError):
    """The circuit contains a loop of voltage sources or a cutset of
    current sources; downstream analysis refuses such inputs."""

    def __init__(self, message, witness=()):
        self.witness = tuple(witness)
        super().__init__(message)


class HypothesisError(MemkitError):
    """A reduction needed an inverse that does not exist (singular
    incremental capacitance/inductance block, for example)."""


class SingularPencilError(MemkitError):
    """det(lambda*E - F) vanishes identically; no Kronecker index exists."""


class NewtonError(MemkitError):
    """Base class for Newton iteration failures."""


class SingularJacobianError(NewtonError):
    """Jacobian was singular at an iterate."""


class NonConvergenceError(NewtonError):
    """Newton did not reach the tolerance within the iteration budget."""

    def __init__(self, iterations, residual_norm):
        self.iterations = iterations
        self.residual_norm = residual_norm
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(residual norm {residual_norm:.3e})"
        )


class InitializationError(MemkitError):
    """Consistent initialization was refused or failed."""

    def __init__(self, message, witness=()):
        self.witness = tuple(witness)
        super().__init__(message)


class SimulationError(MemkitError):
    """Time stepping failed; the message names the failing time."""
