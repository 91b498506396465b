"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class NLSLabError(Exception):
    exit_code = 1


class ConfigInvalid(NLSLabError):
    exit_code = 2


class NotConverged(NLSLabError):
    exit_code = 3


class NoBracketing(NotConverged):
    pass


class NewtonDiverged(NotConverged):
    pass


class SingularJacobian(NotConverged):
    pass


class NotFound(NotConverged):
    pass


class ToleranceUnmet(NotConverged):
    pass


class BracketFailed(NotConverged):
    pass


class HorizonTooShort(NotConverged):
    pass


class TailNotConverged(NotConverged):
    pass


class IllConditionedGram(NotConverged):
    pass


class WindowTooShort(NLSLabError):
    exit_code = 2


class InterpolationOutOfRange(NLSLabError):
    exit_code = 2


class ProfileTooWide(NLSLabError):
    exit_code = 2


class GridMismatch(NLSLabError):
    exit_code = 2


class SolitonLeftBox(NLSLabError):
    exit_code = 3


class SupportOverflow(NLSLabError):
    exit_code = 2


class PathNotConvergent(NLSLabError):
    exit_code = 3


class PathExhausted(NLSLabError):
    exit_code = 3


class CoincidentPoints(NLSLabError):
    exit_code = 2


class NonFinite(NLSLabError):
    exit_code = 4


class FormatError(NLSLabError):
    exit_code = 5
