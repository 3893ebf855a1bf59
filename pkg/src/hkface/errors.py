"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (the class name by
default) so the CLI can report failures as JSON without string matching.
"""


class HKFaceError(Exception):
    code = "Error"

    def __init__(self, message=""):
        super().__init__(message)
        self.message = message


class InputError(HKFaceError):
    """Bad or unreadable input data."""

    code = "InputError"


class ParseError(InputError):
    code = "ParseError"

    def __init__(self, message, line=None, offset=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.offset = offset


class DimensionMismatch(InputError):
    code = "DimensionMismatch"


class RectOutOfBounds(InputError):
    code = "RectOutOfBounds"


class BadParams(HKFaceError, ValueError):
    code = "BadParams"


class DetectionError(HKFaceError):
    """A detector could not produce a result for the given data."""

    code = "DetectionError"


class DegenerateHistogram(DetectionError):
    code = "DegenerateHistogram"


class NoValidPixels(DetectionError):
    code = "NoValidPixels"


class NoCandidates(DetectionError):
    code = "NoCandidates"


class SingleCandidate(DetectionError):
    code = "SingleCandidate"


class InsufficientSupport(DetectionError):
    code = "InsufficientSupport"


class CenterInvalid(DetectionError):
    code = "CenterInvalid"
