"""Exception hierarchy shared by all featlab modules."""


class InputError(ValueError):
    """Arguments outside the documented domain."""


class CapabilityError(NotImplementedError):
    """The requested operation is not available for this object."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to deliver the requested accuracy."""


class QuadratureError(NumericalError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class IllConditionedError(NumericalError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class StepSizeError(NumericalError):
    """A descent step increased the objective; reduce the learning rate."""


class InstabilityError(NumericalError):
    """Iterates diverged."""
