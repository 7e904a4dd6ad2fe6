"""Exception types raised across the toolkit.

Everything derives from :class:`PgnbscError`; errors caused by bad input data
additionally derive from :class:`ValueError` so callers that only know the
standard library can still catch them.
"""


class PgnbscError(Exception):
    """Base class for all toolkit errors."""


class DataError(PgnbscError, ValueError):
    """Input data violates a precondition."""


# signal_io
class MalformedFile(DataError):
    pass


class InconsistentRates(DataError):
    pass


class MissingChannel(DataError):
    def __init__(self, name):
        super().__init__(f"no channel matches {name!r}")
        self.name = name


class AmbiguousChannel(DataError):
    def __init__(self, name, matches=()):
        super().__init__(f"{name!r} matches several channels: {list(matches)}")
        self.name = name
        self.matches = list(matches)


class UnknownLabel(DataError):
    def __init__(self, label):
        super().__init__(f"unknown seizure label {label!r}")
        self.label = label


class InvertedInterval(DataError):
    pass


class BadDuration(DataError):
    pass


class BadRate(DataError):
    pass


# preprocess
class RateTooLow(DataError):
    pass


class WrongRate(DataError):
    pass


# features
class TooShort(DataError):
    pass


class ZeroVariance(DataError):
    pass


class DegeneratePath(DataError):
    pass


# dataset / nbayes
class EmptyClass(DataError):
    pass


class EmptyMask(DataError):
    pass


class WidthMismatch(DataError):
    pass


class RegistryMismatch(DataError):
    pass


# bgwo
class Exhausted(PgnbscError):
    """The optimiser has already used its full iteration budget."""


# evalreport
class EmptyEval(DataError):
    pass


class UndefinedMetric(DataError):
    """Metric has a zero denominator (e.g. F1 with TP+FP+FN = 0)."""


class LengthMismatch(DataError):
    pass
