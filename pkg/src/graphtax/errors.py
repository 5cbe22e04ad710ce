"""Exception hierarchy shared by the library and the CLI.

The CLI maps :class:`InputError` (and subclasses) to exit code 1 and
everything else derived from :class:`GraphtaxError` to exit code 2.
"""


class GraphtaxError(Exception):
    pass


class InputError(GraphtaxError, ValueError):
    """Invalid arguments, shapes, or dataset contents."""


class LoadError(InputError):
    """A dataset file could not be parsed."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class NumericError(GraphtaxError, ArithmeticError):
    """A computation produced NaN or Inf."""


class EvaluationError(GraphtaxError):
    """A metric could not be evaluated (e.g. no class has both polarities)."""


class DivergenceError(GraphtaxError):
    """Too many training runs diverged for a protocol to be trusted."""
