"""Exception hierarchy. The CLI maps each class to a process exit code."""


class QtagError(Exception):
    exit_code = 1


class ConfigError(QtagError, ValueError):
    """Invalid configuration or input data. ``path`` names the offending field."""

    exit_code = 2

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ParseError(ConfigError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, path=path)


class BudgetError(QtagError, MemoryError):
    exit_code = 3


class NumericError(QtagError, ArithmeticError):
    exit_code = 4


class ConvergenceError(NumericError):
    def __init__(self, message, violation):
        self.violation = violation
        super().__init__(f"{message} (max KKT violation {violation:.3e})")
