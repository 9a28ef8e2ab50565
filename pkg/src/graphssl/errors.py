"""Exception hierarchy shared by every algorithm in the package."""


class GraphSSLError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(GraphSSLError, ValueError):
    pass


class GraphConstructionError(GraphSSLError):
    """Raised when a graph would violate its invariants (e.g. an isolated node)."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class DisconnectedError(GraphSSLError):
    """Raised when a computation needs connectivity the graph does not have."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class SingularSystemError(GraphSSLError):
    """A linear system that must be solved is singular or indefinite."""


class ConfigError(GraphSSLError, ValueError):
    pass


class CsvFormatError(GraphSSLError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
