"""Exception types raised by the estimation pipeline."""


class PcpSenseError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(PcpSenseError, ValueError):
    """A configuration or model parameter is outside its valid range."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class IntegrationDivergedError(PcpSenseError, RuntimeError):
    """A state became non-finite during time integration."""

    def __init__(self, t, message="state became non-finite"):
        self.t = t
        super().__init__(f"t={t:.6f} s: {message}")


class CovarianceCollapseError(PcpSenseError, RuntimeError):
    """The error covariance lost positive definiteness."""

    def __init__(self, t, min_eig):
        self.t = t
        self.min_eig = min_eig
        super().__init__(f"t={t:.6f} s: covariance not positive definite (min eig {min_eig:.3e})")


class InsufficientDataError(PcpSenseError, ValueError):
    """Not enough (locked) samples to compute a statistic."""


class ParseError(PcpSenseError, ValueError):
    """Malformed telemetry or configuration input."""

    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
