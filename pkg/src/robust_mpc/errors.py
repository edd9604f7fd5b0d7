"""Exception hierarchy shared by all modules."""


class RobustMPCError(Exception):
    pass


class NumericalFailure(RobustMPCError, ArithmeticError):
    """Non-finite result, singular factorization, or a solver that did not converge."""


class DomainError(RobustMPCError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ModelConstructionError(RobustMPCError, ValueError):
    """Matrices that violate a model invariant (shape, G D^T = 0, D D^T > 0)."""


class IllPosedProblem(RobustMPCError, ArithmeticError):
    """MPC normal equations singular to working precision."""


class DivergenceError(NumericalFailure):
    """Plant simulation produced a non-finite state."""


class ConfigError(RobustMPCError, ValueError):
    """Invalid scenario file, unknown override key, or failed validation."""
