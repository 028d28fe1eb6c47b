"""Exception types shared across the package."""


class RpensError(Exception):
    """Base class for errors raised by this package."""


class InvalidDimensionError(RpensError):
    """Requested projection or model dimensions are impossible."""


class ShapeMismatchError(RpensError):
    """Array shapes are inconsistent with the fitted object."""


class MissingClassError(RpensError):
    """A training set lacks one of the two required classes."""


class SingularCovarianceError(RpensError):
    """A covariance estimate stayed singular after the ridge fallback."""


class EstimationFailureError(RpensError):
    """A leave-one-out refit failed in a way that cannot be scored.

    Carries the index of the deleted point.
    """

    def __init__(self, point_index, message=None):
        self.point_index = point_index
        super().__init__(message or f"leave-one-out refit failed at point {point_index}")


class BlockFailureError(RpensError):
    """Every candidate projection in a block failed to produce an estimate."""


class DegenerateVotesError(RpensError):
    """The in-sample votes cannot support a data-driven threshold."""


class DataFormatError(RpensError):
    """A data file violates the expected CSV schema."""


class ExperimentError(RpensError):
    """An experiment repetition could not produce any method result."""
