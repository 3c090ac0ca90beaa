"""Exception types shared across the package."""


class RichQueryError(Exception):
    """Base class for all package-specific errors."""


class ParseError(RichQueryError):
    """A data file row could not be parsed."""


class DimensionError(RichQueryError):
    """Inconsistent vector dimensions."""


class DegenerateLabelsError(RichQueryError):
    """A classifier fit was requested with only one label class present."""


class RankDeficiencyError(RichQueryError):
    """A regression has no identifiable slope (constant regressor)."""


class ZeroVarianceError(RichQueryError):
    """A distribution fit was requested on constant data."""


class NumericalDegeneracyError(RichQueryError):
    """A covariance lost positive definiteness beyond repair."""


class KindMismatchError(RichQueryError):
    """A response does not match the kind or shape of its query."""


class InfeasibleConfigError(RichQueryError):
    """A query configuration is outside the feasible range (e.g. nonpositive cost)."""


class NoFeasibleQueryError(RichQueryError):
    """No query configuration has a positive information rate."""


class DegenerateCommitteeError(RichQueryError):
    """The committee carries no disagreement, so ratios are undefined."""


class ProtocolError(RichQueryError):
    """A session call violates the create/next/answer state machine."""


class SessionNotFoundError(RichQueryError):
    """Unknown session id."""


class ConfigError(RichQueryError):
    """An experiment or session configuration is invalid."""
