"""Exception types shared across the package."""


class ProtoImputeError(Exception):
    """Base class for package-specific errors."""


class ShapeError(ProtoImputeError, ValueError):
    """Operands have incompatible or invalid shapes."""


class NonFiniteError(ProtoImputeError, FloatingPointError):
    """An operation produced NaN or infinite entries."""


class DegenerateInputError(ProtoImputeError, ValueError):
    """Input is outside the operation's domain (zero vector, negative entry, ...)."""


class UnknownParameterError(ProtoImputeError, ValueError):
    """A matrix was used as a parameter without being registered as one."""


class ContractError(ProtoImputeError, ValueError):
    """A documented precondition on the input data was violated."""


class ConfigError(ProtoImputeError, ValueError):
    """Invalid configuration value."""


class DataFormatError(ProtoImputeError, ValueError):
    """A dataset file is malformed."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}: "
        if line is not None:
            where = f"{where}line {line}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class TrainingAbortError(ProtoImputeError, RuntimeError):
    """Training stopped because a loss or gradient became non-finite."""
