"""Exception hierarchy shared across the package."""


class SubfilterError(Exception):
    """Base class; ``kind`` is the tag printed by the CLI."""

    kind = "error"


class ValidationError(SubfilterError, ValueError):
    kind = "validation"


class DimensionMismatch(ValidationError):
    kind = "dimension"


class FactorizationFailed(SubfilterError, ArithmeticError):
    kind = "factorization"


class InnerSolveFailed(SubfilterError, ArithmeticError):
    kind = "inner-solve"


class SolveFailed(SubfilterError, ArithmeticError):
    kind = "solve"


class EigDecompFailed(SubfilterError, ArithmeticError):
    kind = "eig"


class AssemblyFailed(SubfilterError, ArithmeticError):
    kind = "assembly"


class NonFiniteState(SubfilterError, FloatingPointError):
    kind = "non-finite"


class OptimFailed(SubfilterError, RuntimeError):
    """Optimizer did not meet its termination test.

    The best iterate found is kept on ``best`` so callers can still use it.
    """

    kind = "optim"

    def __init__(self, msg, best=None, diagnostics=None):
        super().__init__(msg)
        self.best = best
        self.diagnostics = diagnostics or {}
