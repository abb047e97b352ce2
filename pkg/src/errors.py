class MfoError(Exception):
    """Base exception for every error raised by the motion forecast optimizer"""
    code = "error"
    exit_code = 1


class ConfigurationError(MfoError):
    """Raised when a config file or flag combination is not valid"""
    code = "configuration"
    exit_code = 2


class MissingReferenceError(ConfigurationError):
    """Raised when a config refers to a file or name that does not exist"""
    code = "missing-reference"


class FileFormatError(MfoError):
    """Raised when a trajectory, scene, manifest or model file is malformed"""
    code = "file-format"
    exit_code = 3


class DimensionMismatchError(MfoError):
    """Raised when arrays do not agree with the declared state layout"""
    code = "dimension-mismatch"
    exit_code = 4
