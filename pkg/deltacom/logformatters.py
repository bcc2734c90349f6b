import logging
from typeguard import typechecked
from deltacom import settings


class LogFormatter(logging.Formatter):
    # tracebacks only in verbose mode
    def __init__(self, verbose: bool) -> None:
        super().__init__(fmt=settings.LOG_FORMAT, datefmt=settings.LOG_DATEFORMAT)
        self.verbose = verbose

    def formatException(self, ei) -> str:  # type: ignore[no-untyped-def]
        if self.verbose:
            return super().formatException(ei)
        return ""


@typechecked
def configure_logging(verbose: bool = False) -> logging.Handler:
    root = logging.getLogger(settings.TOOL_NAME)
    for handler in list(root.handlers):
        if isinstance(handler.formatter, LogFormatter):
            root.removeHandler(handler)

    handler = logging.StreamHandler()
    handler.setFormatter(LogFormatter(verbose))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    return handler
