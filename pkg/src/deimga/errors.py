"""Exception hierarchy.

Validation problems (bad shapes, bad input files, bad configs) derive from
``ValidationError``; failures of the numerics derive from ``NumericalError``.
The CLI maps the two families to exit codes 1 and 2.
"""


class DeimgaError(Exception):
    pass


class ValidationError(DeimgaError, ValueError):
    pass


class DimensionError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class MatrixFormatError(ValidationError):
    """Malformed matrix file. ``kind`` is one of header/ragged/nonfinite/parse."""

    def __init__(self, message, kind="parse", line=None):
        super().__init__(message)
        self.kind = kind
        self.line = line


class NumericalError(DeimgaError, ArithmeticError):
    pass


class DegenerateInputError(NumericalError):
    pass


class RankDeficiencyError(NumericalError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DivergenceError(NumericalError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ClassificationError(NumericalError):
    pass
