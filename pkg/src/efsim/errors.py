"""Exception hierarchy shared by all efsim modules."""


class EfsimError(Exception):
    """Base class for every error raised by efsim."""


class DomainError(EfsimError, ValueError):
    """An argument violates a documented precondition."""


class ConfigError(EfsimError, ValueError):
    """A run configuration is inconsistent or incomplete."""


class LibsvmParseError(EfsimError, ValueError):
    """A LIBSVM text file is malformed; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class PowerIterationError(EfsimError, RuntimeError):
    """Power iteration failed to converge; carries the iteration count."""

    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class TheoryCheckError(EfsimError, RuntimeError):
    """An inline per-round inequality check failed during a run."""
