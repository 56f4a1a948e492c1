"""Exception types shared across the package."""


class SmirlError(Exception):
    """Base class for all package errors."""


class ParameterError(SmirlError, ValueError):
    """Invalid argument or malformed input object."""


class ParseError(SmirlError, ValueError):
    """Malformed input file; message carries the offending line when known."""


class ContractError(SmirlError, RuntimeError):
    """A documented precondition between modules was violated."""


class SamplingError(SmirlError, RuntimeError):
    """Sample generation failed for a demonstration (fewer than 2 members)."""


class SmoothingError(SmirlError, RuntimeError):
    """Pure-pursuit tracker diverged while smoothing a path."""


class InfeasibleProfileError(SmirlError, RuntimeError):
    """Boundary speeds or timing constraints admit no speed profile."""


class DegenerateHessianError(SmirlError, RuntimeError):
    """Laplace approximation undefined (flat or non-finite reward Hessian)."""


class PredictionError(SmirlError, RuntimeError):
    """No candidate trajectory available for prediction."""


class ForwardOptimizationError(SmirlError, RuntimeError):
    """The forward trajectory optimizer diverged."""
