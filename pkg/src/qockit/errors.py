"""Exception types shared across the package."""


class QockitError(Exception):
    """Base class for all package errors."""


class StructureError(QockitError):
    """Shape, dimension or grid mismatch between objects that must agree."""


class UnknownLabelError(QockitError, KeyError):
    """A level label does not exist in the model."""


class PropagationError(QockitError):
    """Numerical failure during time propagation; carries the step index."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step
