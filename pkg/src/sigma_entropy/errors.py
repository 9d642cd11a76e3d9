"""Exception hierarchy shared by every module."""


class SigmaEntropyError(ValueError):
    """Base class for all library errors."""


class DuplicateAtom(SigmaEntropyError):
    pass


class NonPositiveMass(SigmaEntropyError):
    pass


class MassSumMismatch(SigmaEntropyError):
    pass


class InvalidDensity(SigmaEntropyError):
    pass


class NegativeThreshold(SigmaEntropyError):
    pass


class SpaceMismatch(SigmaEntropyError):
    pass


class InvalidPartition(SigmaEntropyError):
    pass


class TooLargeForExhaustive(SigmaEntropyError):
    pass


class UnknownPhi(SigmaEntropyError):
    pass


class BadExponent(SigmaEntropyError):
    pass


class InvalidPhi(SigmaEntropyError):
    pass


class DeltaOutOfRange(SigmaEntropyError):
    pass


class NotUpperLimit(SigmaEntropyError):
    pass


class UnboundedDensity(SigmaEntropyError):
    pass


class EmptyPeriod(SigmaEntropyError):
    pass


class BadStepLaw(SigmaEntropyError):
    pass


class DepthExceeded(SigmaEntropyError):
    pass


class InsufficientSamples(SigmaEntropyError):
    pass
