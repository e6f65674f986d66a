"""Exception hierarchy shared by every module of the package."""


class FoliationBlowupError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(FoliationBlowupError, ValueError):
    pass


class DimensionMismatch(FoliationBlowupError, ValueError):
    pass


class NotBracketClosed(FoliationBlowupError):
    """Structure-function collocation could not reproduce a bracket."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoRegularApproach(FoliationBlowupError):
    """Every sampled ray approached the basepoint through singular points only."""


class NotInAlgebra(FoliationBlowupError):
    pass


class NotComposable(FoliationBlowupError):
    pass


class FlowEscape(FoliationBlowupError):
    pass


class ClassUnresolved(FoliationBlowupError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RankDrop(FoliationBlowupError):
    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class Inconclusive:
    """Sentinel returned by semi-decision procedures that cannot certify an answer.

    It is falsy on purpose only in the sense that ``bool()`` raises: callers must
    check ``result is INCONCLUSIVE`` explicitly instead of treating it as a boolean.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INCONCLUSIVE"

    def __bool__(self):
        raise TypeError("INCONCLUSIVE has no truth value; compare with `is INCONCLUSIVE`")


INCONCLUSIVE = Inconclusive()
