"""Exception hierarchy. Each class carries the CLI exit code for its category."""


class RotopumpError(Exception):
    exit_code = 1


class InvalidParameterError(RotopumpError, ValueError):
    exit_code = 3


class ConfigError(RotopumpError, ValueError):
    exit_code = 2


class StepSizeError(InvalidParameterError):
    exit_code = 4


class WindowTooSmallError(InvalidParameterError):
    exit_code = 4


class SingularGeometryError(InvalidParameterError):
    exit_code = 4


class NoSolutionError(InvalidParameterError):
    exit_code = 4


class ResourceLimitError(RotopumpError):
    exit_code = 5


class AccuracyError(RotopumpError, ArithmeticError):
    exit_code = 6


class NotConvergedError(RotopumpError):
    exit_code = 6


class DegenerateNetworkError(RotopumpError, ArithmeticError):
    exit_code = 6
