"""Exception hierarchy shared by all bdkit modules."""


class BDKitError(Exception):
    """Base class for all bdkit errors."""


# --- sample validation ---------------------------------------------------

class NonPositiveRate(BDKitError):
    pass


class NonFiniteQuality(BDKitError):
    pass


class DuplicateRate(BDKitError):
    pass


class NonMonotoneQuality(BDKitError):
    pass


class TooFewPoints(BDKitError):
    pass


class DuplicateX(BDKitError):
    pass


class MetricMismatch(BDKitError):
    pass


class EmptyIntersection(BDKitError):
    pass


# --- interpolation / integration -----------------------------------------

class SingularSystem(BDKitError):
    pass


class OutOfDomain(BDKitError):
    pass


class ToleranceNotMet(BDKitError):
    pass


# --- neural estimator ------------------------------------------------------

class FlatY(BDKitError):
    pass


class DegenerateSpan(BDKitError):
    pass


class ExtrapolationRequired(BDKitError):
    pass


class DimensionMismatch(BDKitError):
    pass


class TooFewSamples(BDKitError):
    pass


class DivergedLoss(BDKitError):
    pass


# --- model bundle I/O -------------------------------------------------------

class BundleError(BDKitError):
    pass


class BadMagic(BundleError):
    pass


class VersionUnsupported(BundleError):
    pass


class ChecksumMismatch(BundleError):
    pass


class MissingCategory(BundleError):
    pass
