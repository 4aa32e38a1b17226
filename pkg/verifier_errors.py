"""
Error types shared by the partition verifier modules.
Library code raises these; partition_verifier.main maps them to exit codes.
"""

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_FAILURE = 3


class VerifierError(Exception):
    """Base class for every error the verifier raises on purpose."""

    exit_code = EXIT_FAILURE


class UsageError(VerifierError):
    exit_code = EXIT_USAGE


class ConfigError(VerifierError):
    """
    Invalid configuration file

    Args:
        message (str): What is wrong
        line (int): 1-based line in the config file, when known
    """

    exit_code = EXIT_USAGE

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CapacityError(VerifierError):
    """A series build would exceed the memory budget."""

    def __init__(self, message, largest_n=None):
        self.largest_n = largest_n
        if largest_n is not None:
            message = f"{message} (largest achievable n_max: {largest_n})"
        super().__init__(message)


class CertificationError(VerifierError):
    pass


class HypothesisViolation(VerifierError):
    """A hypothesis of an error bound does not hold; constraint names it."""

    def __init__(self, constraint, detail=''):
        self.constraint = constraint
        message = f"hypothesis violated: {constraint}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class DomainError(VerifierError, ValueError):
    pass


class MethodFailure(VerifierError):
    pass


class RootBracketError(VerifierError):
    def __init__(self, message, interval):
        self.interval = interval
        super().__init__(f"{message}; scanned interval [{interval[0]}, {interval[1]}]")


class CheckpointError(VerifierError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointHashError(CheckpointError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


class SeriesCacheError(VerifierError):
    pass
