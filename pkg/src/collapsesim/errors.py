"""Exception types raised across the package."""


class CollapseSimError(Exception):
    """Base class for all package errors."""


class ConfigurationError(CollapseSimError, ValueError):
    """Invalid sizes, rates or other model parameters."""


class UsageError(CollapseSimError, ValueError):
    """An operation was called on an incompatible object (wrong space, factor kind, ...)."""


class NumericalContractError(CollapseSimError, ArithmeticError):
    """A numerical precondition or postcondition (Hermiticity, unitarity) failed."""


class DegenerateStateError(CollapseSimError, ValueError):
    """The state has zero norm or zero total weight, so no distribution can be formed."""


class OrderingError(CollapseSimError, ValueError):
    """A spacetime cell was absorbed before its causal past."""
