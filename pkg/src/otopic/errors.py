"""Exception types shared across the pipeline."""


class OtopicError(Exception):
    """Base class for all pipeline errors."""


class FileTooLarge(OtopicError):
    pass


class MissingColumn(OtopicError):
    pass


class MalformedCsv(OtopicError):
    pass


class EmptyVocabulary(OtopicError):
    pass


class DimensionTooLarge(OtopicError):
    pass


class DimensionMismatch(OtopicError):
    pass


class RowCountMismatch(OtopicError):
    pass


class NonFiniteValue(OtopicError):
    pass


class InvalidCost(OtopicError):
    pass


class NotASimplex(OtopicError):
    pass


class EmptyReference(OtopicError):
    pass


class LengthMismatch(OtopicError):
    pass


class MissingLabels(OtopicError):
    pass


class SweepFailed(OtopicError):
    pass


class ParseError(OtopicError):
    pass
