"""Exception hierarchy shared by all workbench modules."""


class WorkbenchError(Exception):
    """Base class for every error raised by this package."""


class InvalidTruncationError(WorkbenchError, ValueError):
    """Truncation bound is too small for the reaction channels."""


class TruncationOverflowError(WorkbenchError, RuntimeError):
    """Probability leaked past ``n_max`` beyond the declared tail tolerance."""

    def __init__(self, message, required_n_max=None):
        super().__init__(message)
        self.required_n_max = required_n_max


class TailMassError(WorkbenchError, ValueError):
    """Truncating an initial distribution discards too much mass."""

    def __init__(self, message, required_n_max=None):
        super().__init__(message)
        self.required_n_max = required_n_max


class DistributionError(WorkbenchError, ValueError):
    """A probability vector violates its invariants."""


class DomainError(WorkbenchError, ValueError):
    """A closed form was evaluated at a pole or off its real branch."""


class StepSizeError(WorkbenchError, RuntimeError):
    """A time stepper detected growth that signals instability."""


class EmptyEnsembleError(WorkbenchError, RuntimeError):
    """Every path of a Monte-Carlo ensemble was flagged."""


class InsufficientEnsembleError(WorkbenchError, ValueError):
    """Too few unflagged paths for a meaningful estimate."""


class DivergenceError(WorkbenchError, ValueError):
    """A series was evaluated inside its convergence radius."""


class RangeError(WorkbenchError, ValueError):
    """Quadrature range truncation exceeds the requested tolerance."""


class ProximityError(WorkbenchError, ValueError):
    """Evaluation point lies too close to the ensemble support."""


class ResolutionError(WorkbenchError, ValueError):
    """Quadrature grid is too coarse for the requested output."""


class AlignmentError(WorkbenchError, ValueError):
    """Two series cannot be compared because their grids differ."""


class ConfigError(WorkbenchError, ValueError):
    """Run configuration failed validation.

    ``pointer`` is a JSON pointer to the offending element.
    """

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class EngineError(WorkbenchError, RuntimeError):
    """An engine failed while executing a scenario."""

    def __init__(self, engine, cause):
        super().__init__(f"engine {engine!r} failed: {cause}")
        self.engine = engine
        self.cause = cause
