"""Exception types shared across the package."""


class EstimationError(Exception):
    """Base class for every error raised by drmean."""


class DimensionMismatch(EstimationError):
    pass


class RankDeficient(EstimationError):
    pass


class Separated(EstimationError):
    pass


class NotConverged(EstimationError):
    pass


class OneClassOnly(EstimationError):
    pass


class MissingColumn(EstimationError):
    pass


class MissingPropensity(EstimationError):
    pass


class TooFewCompleteCases(EstimationError):
    pass


class NoCompleteCases(EstimationError):
    pass


class DegenerateWeights(EstimationError):
    pass


class InvalidLambda(EstimationError):
    pass


class SingularCorrection(EstimationError):
    pass


class InsufficientReplicates(EstimationError):
    pass


class AllFailed(EstimationError):
    pass


class ConfigError(EstimationError):
    pass


class DataError(EstimationError):
    pass
