"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Fields do not share a grid or have the wrong shape."""


class ParameterError(ValueError):
    """A scalar parameter is out of its admissible range."""


class DegenerateFieldError(ValueError):
    """An operation received a zero field where a nonzero one is required."""


class HypothesisViolationError(ParameterError):
    """Noise-basis parameters violate the summability hypothesis."""


class AliasingError(ParameterError):
    """More noise modes requested than the grid can resolve."""


class BlowUpError(RuntimeError):
    """A trajectory produced a non-finite field.

    Carries the step index at which the blow-up was detected.
    """

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite field at step {step}")


class ConfigError(ValueError):
    """A run configuration failed schema or constraint validation."""
