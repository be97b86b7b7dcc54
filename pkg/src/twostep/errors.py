"""Exception hierarchy shared by every module."""


class TwoStepError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(TwoStepError):
    """A vector, qrels or run file line could not be parsed."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{self.path}:{lineno}: {message}")


class IngestionError(TwoStepError):
    """Well-formed input that violates a collection invariant."""


class IndexFormatError(TwoStepError):
    """An on-disk index could not be loaded."""


class VersionMismatchError(IndexFormatError):
    pass


class TruncatedFileError(IndexFormatError):
    pass


class ChecksumError(IndexFormatError):
    pass


class DocidOutOfRangeError(TwoStepError, IndexError):
    pass


class QueryMismatchError(TwoStepError):
    """Two inputs that must cover the same query ids do not."""

    def __init__(self, message, missing=()):
        self.missing = sorted(missing)
        if self.missing:
            shown = ", ".join(self.missing[:20])
            more = "" if len(self.missing) <= 20 else f" (+{len(self.missing) - 20} more)"
            message = f"{message}: {shown}{more}"
        super().__init__(message)
