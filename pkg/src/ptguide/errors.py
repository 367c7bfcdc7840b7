"""Exception hierarchy shared by the solvers and the command-line front end."""


class PTGuideError(Exception):
    """Base class for all errors raised by this package."""


class InvalidGeometry(PTGuideError, ValueError):
    pass


class DegenerateCoupling(PTGuideError, ValueError):
    """|alpha| d / pi is (numerically) an integer: a transverse normalisation blows up."""


class OutOfDomain(PTGuideError, ValueError):
    pass


class MismatchedGeometry(PTGuideError, ValueError):
    pass


class ThresholdProximity(PTGuideError, ValueError):
    """The spectral parameter sits on top of a branch point of the secular function."""


class NotSymmetric(PTGuideError, ValueError):
    pass


class NoConvergence(PTGuideError, RuntimeError):
    """Iteration failed.  ``partial`` holds whatever was found before giving up."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = [] if partial is None else list(partial)


class IllConditionedNullspace(PTGuideError, RuntimeError):
    pass


class InvalidChannel(PTGuideError, ValueError):
    pass


class SeriesNotConverged(PTGuideError, RuntimeError):
    pass


class NoEigenvaluePredicted(PTGuideError, ValueError):
    pass


class StepRefinementExhausted(PTGuideError, RuntimeError):
    pass


class ConfigInvalid(PTGuideError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class MissingField(PTGuideError, KeyError):
    def __init__(self, field):
        super().__init__(field)
        self.field = field

    def __str__(self):
        return f"missing field: {self.field}"
