"""
Exception types.
"""


class ValidationError(ValueError):
    """
    An object fails a physical or structural check: a density matrix that is
    not positive semi-definite, an unnormalized amplitude vector, ...
    """


class BudgetError(ValueError):
    """
    A request exceeds a combinatorial budget and is refused.
    """


class CheckpointError(ValueError):
    """
    A checkpoint or circuit file has the wrong format or version.
    """


class OptimizationError(RuntimeError):
    """
    Every optimizer restart produced non-finite objective values.
    """
