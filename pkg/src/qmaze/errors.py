"""Exception types shared across the package."""


class QMazeError(Exception):
    """Base class for qmaze-specific errors."""


class NumericalInstabilityError(QMazeError):
    """The integrator produced a non-physical state (NaN/Inf or PSD violation)."""


class CapabilityError(QMazeError):
    """Requested computation exceeds a built-in cost guard."""


class ProtocolError(QMazeError):
    """Environment API used out of order (e.g. step() after the episode ended)."""
