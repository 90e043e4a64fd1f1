"""Exception hierarchy shared by all solver modules."""


class MFLQError(Exception):
    """Base class for all library errors."""


class DomainError(MFLQError, ValueError):
    """An argument value lies outside the mathematical domain of the operation."""


class StructuralError(MFLQError, ValueError):
    """Shapes, grids, or required symmetry of the inputs are inconsistent."""


class IllConditionedError(MFLQError, RuntimeError):
    """A control-weight matrix became numerically singular along the flow.

    Carries the time at which the condition estimate exceeded the abort
    threshold, so the diagnostic names where the flow broke down.
    """

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time
