"""Exception hierarchy shared by the pipeline, the networks and the runner."""


class ForecastError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ForecastError, ValueError):
    """A spec, config or argument is outside its allowed range."""


class ShapeError(ForecastError, ValueError):
    """Array extents do not line up."""


class DataError(ForecastError):
    """Problems with the input dataset."""


class DataFormatError(DataError, ValueError):
    """The file does not follow the expected CSV layout."""


class ParseError(DataFormatError):
    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class EmptyDatasetError(DataError, ValueError):
    pass


class DegenerateColumnError(DataError, ValueError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column!r} is constant; cannot min-max normalize it")


class SizeError(DataError, ValueError):
    """Not enough rows for the requested window/test split."""


class FetchError(DataError):
    pass


class NumericError(ForecastError, ArithmeticError):
    """A NaN or infinity showed up where finite values are required."""


class DivergenceError(NumericError):
    def __init__(self, epoch, message="training loss became non-finite"):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}")


class UndefinedMetricError(ForecastError, ValueError):
    pass
