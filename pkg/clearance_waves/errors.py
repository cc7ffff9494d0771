"""
Exception hierarchy shared by every module, with the process exit code each maps to
"""

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIGURATION = 2
EXIT_RESOURCE = 3


class ClearanceError(Exception):
    """Base class for toolkit errors"""
    exit_code = EXIT_CHECK_FAILED


class ConfigurationError(ClearanceError):
    """Unknown names, malformed scenario files, invalid numeric parameters"""
    exit_code = EXIT_CONFIGURATION


class ResourceError(ClearanceError):
    """A configured resource cap (node count) would be exceeded"""
    exit_code = EXIT_RESOURCE


class DomainExitError(ClearanceError):
    """
    Raised when an integrated trajectory leaves the global state box

    The partial trajectory up to (and excluding) the offending step is kept on
    the exception so callers can still inspect it.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class CertificateInfeasibleError(ClearanceError):
    pass


class DegenerateGraphError(ClearanceError):
    pass


class InvalidSourceError(ClearanceError):
    pass


class InvalidTargetError(ClearanceError):
    pass


class NoPathError(ClearanceError):
    pass


class UndefinedDistanceError(ClearanceError):
    pass


class NoObstacleError(ClearanceError):
    pass


class InadmissibleTrajectoryError(ClearanceError):
    pass


class ResolutionError(ClearanceError):
    pass
