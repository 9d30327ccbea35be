"""Exception hierarchy shared by every backend."""


class FibmonError(Exception):
    """Base class for all package errors."""


class ConfigError(FibmonError, ValueError):
    """Invalid run configuration or parameter (CLI exit code 2)."""


class SizeError(FibmonError, ValueError):
    """Requested size exceeds what a backend supports."""


class NumericalError(FibmonError, ArithmeticError):
    """Floating-point breakdown (zero-norm branch, overflow, solver failure)."""


class StateError(FibmonError):
    """A quantum-state invariant (purity, rank, commutation) was violated."""


class UsageError(FibmonError):
    """Operation called on a state that lacks the required structure."""


class FitError(FibmonError):
    """A statistical fit could not be performed on the given data."""
