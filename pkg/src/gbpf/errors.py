"""Exception types shared across the package."""


class GbpfError(Exception):
    """Base class for all package-specific errors."""


class CovarianceError(GbpfError):
    """Invalid covariance parameters or evaluation request."""


class OutOfTableError(CovarianceError):
    """Tabulated covariance evaluated past its table under the reject rule."""


class CovarianceNotAdmissible(GbpfError):
    """A (p, C) pair failed the admissibility check.

    Carries the offending report so callers can surface the violated
    clauses.
    """

    def __init__(self, report):
        self.report = report
        super().__init__(report.describe())


class NegativeGapProbability(GbpfError):
    """The gap-law recursion produced a materially negative probability.

    The (p, C) pair does not define a consistent binary-sequence law at the
    requested horizon.
    """

    def __init__(self, k, value):
        self.k = int(k)
        self.value = float(value)
        super().__init__(f"gap probability at k={self.k} is {self.value:.3e} < 0")


class SizeGuardExceeded(GbpfError):
    """An exact-enumeration oracle was asked for more than it can afford."""


class NotRepresentable(GbpfError):
    """A requested balanced subset cannot exist (discrete mass constraint)."""


class RejectionCapExceeded(GbpfError):
    """Rejection sampling exceeded its attempt cap."""
