"""Exception hierarchy shared by every module of the package."""


class KFPError(Exception):
    """Base class for all errors raised by kfpkernel."""


class ValidationError(KFPError):
    """Problem data does not satisfy the structural hypotheses."""


class NumericError(KFPError):
    """A numerical computation failed."""


class NotPositiveDefinite(NumericError):
    pass


class MatrixExpOverflow(NumericError):
    pass


class BadBlockShape(ValidationError):
    pass


class RankDeficientBlock(ValidationError):
    def __init__(self, j, rank, expected):
        self.j = j
        self.rank = rank
        self.expected = expected
        super().__init__(
            f"RankDeficientBlock: block B_{j} has rank {rank}, expected {expected}"
        )


class NonZeroForbiddenBlock(ValidationError):
    def __init__(self, row, col, value):
        self.row = row
        self.col = col
        super().__init__(
            f"NonZeroForbiddenBlock: block ({row},{col}) must vanish, max |entry| = {value:.3g}"
        )


class NonPositivePiece(ValidationError):
    pass


class NotAfterInitialTime(NumericError):
    pass


class CovarianceFailure(NumericError):
    pass


class BreakpointTooClose(KFPError):
    pass


class HorizonExceeded(KFPError):
    def __init__(self, elapsed, horizon, raw_horizon):
        self.elapsed = elapsed
        self.horizon = horizon
        self.raw_horizon = raw_horizon
        super().__init__(
            f"HorizonExceeded: t - t0 = {elapsed:g} is beyond the usable horizon "
            f"{horizon:g} (raw horizon {raw_horizon:g} times safety factor)"
        )


class NoPositiveHorizon(NumericError):
    pass


class UnsupportedDimension(KFPError):
    pass


class FitFailed(NumericError):
    pass


class InconsistentSigma(ValidationError):
    pass


class ExpressionError(KFPError):
    """A datum expression failed to parse or evaluate."""


class NonFiniteDatum(ValidationError):
    """Initial datum evaluated to inf or nan on the sampling points."""


class ProblemFileError(KFPError):
    """A problem or datum file is malformed (bad JSON, wrong schema, missing keys)."""
