"""Exception types shared across the package.

Each failure mode that callers are expected to catch gets its own class;
the CLI maps a subset of these onto process exit codes.
"""


class RadonlabError(Exception):
    """Base class for package errors."""


class DimensionMismatchError(RadonlabError, ValueError):
    """Inputs disagree about an ambient or parameter dimension."""


class UnsupportedInputError(RadonlabError, ValueError):
    """An operation was asked for on inputs it cannot handle."""


class InversionError(RadonlabError):
    """Newton inversion of a parametrized map failed to converge."""


class ConditioningError(RadonlabError):
    """A regression or stencil solve was too ill-conditioned to trust."""


class GrowthError(RadonlabError):
    """Bracket closure exceeded the configured size bound."""


class EscapeError(RadonlabError):
    """A trajectory left the configured domain box."""


class DegeneratePointError(RadonlabError):
    """All scaled fields vanish (or lose rank) at the base point."""


class ChartDegenerateError(RadonlabError):
    """The chart Jacobian is numerically singular at a sampled point."""


class KernelClassError(RadonlabError):
    """A kernel piece violates its cancellation rule.

    Carries the offending scale index and coordinate group.
    """

    def __init__(self, message, index=None, group=None):
        super().__init__(message)
        self.index = index
        self.group = group


class CoverageError(RadonlabError):
    """A sample point left the grid box where a cutoff still sees it.

    Carries the first offending (point, where) pair for diagnostics.
    """

    def __init__(self, message, point=None, where=None):
        super().__init__(message)
        self.point = point
        self.where = where


class ContractionError(RadonlabError):
    """A Neumann series was requested with contraction >= 1."""

    def __init__(self, message, measured=None):
        super().__init__(message)
        self.measured = measured


class FitError(RadonlabError):
    """Too little usable data to fit a decay rate."""


class UsageError(RadonlabError, ValueError):
    """Bad or missing configuration for a CLI command."""
