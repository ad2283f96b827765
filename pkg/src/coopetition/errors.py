"""Exception hierarchy. Every error carries the CLI exit code it maps to."""

from __future__ import annotations


class CoopetitionError(Exception):
    exit_code = 1


class ConfigError(CoopetitionError, ValueError):
    exit_code = 2


class FormatError(ConfigError):
    """Unknown export/input format."""


class DataError(CoopetitionError, ValueError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDatasetError(DataError):
    pass


class GradeRangeError(DataError):
    pass


class LabelSetError(DataError):
    pass


class DimensionError(DataError):
    pass


class WeightError(DataError):
    pass


class EmptySampleError(DataError):
    pass


class UndefinedModularityError(DataError):
    """Modularity of a graph with zero total edge weight."""


class CommunityLookupError(DataError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class MissingGroundTruthError(DataError):
    pass


class DivergenceError(CoopetitionError, ArithmeticError):
    exit_code = 4

    def __init__(self, message: str, pair: tuple[int, int] | None = None):
        self.pair = pair
        super().__init__(message)
