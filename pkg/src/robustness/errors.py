"""
Exceptions raised by the robustness library
"""


class RobustnessError(Exception):
    """Base class for every library error"""


class InvalidObject(RobustnessError, ValueError):
    """An object violates its defining invariants"""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field

    def __str__(self):
        message = super().__str__()
        if self.field:
            return f"{self.field}: {message}"
        return message


class NotSquare(InvalidObject):
    pass


class NotHermitian(InvalidObject):
    pass


class DimensionMismatch(RobustnessError, ValueError):
    pass


class ShapeMismatch(RobustnessError, ValueError):
    pass


class SizeOverflow(RobustnessError):
    pass


class InvalidJoint(InvalidObject):
    pass


class InvalidSize(RobustnessError, ValueError):
    pass


class NotSubnormalized(InvalidObject):
    pass


class UnsupportedForm(RobustnessError):
    pass


class KindMismatch(RobustnessError, ValueError):
    pass


class NotInImage(RobustnessError, ValueError):
    pass


class ZeroWitness(RobustnessError, ValueError):
    pass


class SlaterFailure(RobustnessError):
    """No strictly feasible point was found for a program"""

    def __init__(self, message, diagnosis=None):
        super().__init__(message)
        self.diagnosis = diagnosis


class SolverFailure(RobustnessError):
    """The conic solver did not return a certified optimum"""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution

    @property
    def status(self):
        return self.solution.status if self.solution is not None else None
