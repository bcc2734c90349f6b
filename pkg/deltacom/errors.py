from typing import Optional
from typeguard import typechecked


@typechecked
class DeltacomError(Exception):
    pass


@typechecked
class GraphParseError(DeltacomError):
    def __init__(self, message: str, line_number: Optional[int] = None) -> None:
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


@typechecked
class UndefinedValueError(DeltacomError):
    pass


@typechecked
class FrontierExhaustedError(DeltacomError):
    pass


@typechecked
class UnknownCommunityError(DeltacomError):
    pass


@typechecked
class RegressionError(DeltacomError):
    pass


@typechecked
class SynthesisError(DeltacomError):
    pass


@typechecked
class FormatError(DeltacomError):
    pass


@typechecked
class InvalidUsageError(DeltacomError):
    pass
