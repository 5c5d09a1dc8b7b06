"""Exception hierarchy for bksens.

Every numerical failure raises a subclass of :class:`BkSensError`, so callers
(and the CLI) can distinguish bad inputs from genuine numerical degeneracy.
"""


class BkSensError(Exception):
    """Base class for all bksens errors."""


class DimensionMismatch(BkSensError):
    """Arrays passed together do not have compatible shapes."""


class RankDeficient(BkSensError):
    """A design matrix is numerically rank deficient."""


class NotSymmetric(BkSensError):
    """A matrix expected to be symmetric is not."""


class NegativeEigenvalue(BkSensError):
    """A matrix expected to be positive semi-definite has a negative eigenvalue."""


class SingularCovariance(BkSensError):
    """A covariance matrix that must be invertible is numerically singular."""


class DegenerateResponse(BkSensError):
    """A response has zero residual variance after conditioning."""


class BoundaryR(BkSensError):
    """A sensitivity parameter sits on or outside the unit-ball boundary."""


class DegenerateObservedR(BkSensError):
    """An observed partial-correlation quantity is too close to one."""


class ConfounderCovarianceDegenerate(BkSensError):
    """The implied residual covariance of the confounder is not positive definite."""


class InsufficientSamples(BkSensError):
    """Too few rows for the requested construction or degrees of freedom."""


class InfeasibleTarget(BkSensError):
    """Requested confounder strengths cannot be realized on this data."""


class RootFindFailed(BkSensError):
    """A scalar root search did not converge or was not bracketed."""


class TooManySingularResamples(BkSensError):
    """Bootstrap redraw budget exhausted on singular resamples."""


class EstimatorFailed(BkSensError):
    """An estimator raised on a bootstrap resample."""

    def __init__(self, resample_index: int, cause: Exception):
        super().__init__(f"estimator failed on resample {resample_index}: {cause}")
        self.resample_index = resample_index
        self.cause = cause


class BudgetTooSmall(BkSensError):
    """Optimizer evaluation budget below the minimum useful size."""


class DegenerateAnchor(BkSensError):
    """A benchmarking anchor makes the conversion formulas undefined."""
