"""Exception types raised across the package."""


class MTFlockError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class UnresolvedKernel(MTFlockError, ValueError):
    """Mollifier support covers fewer than four grid cells."""

    exit_code = 2


class DomainMismatch(MTFlockError, ValueError):
    """Grid function and grid do not agree."""


class VacuumRatio(MTFlockError, ArithmeticError):
    """Weighted density vanished where the ratio integrand is positive."""


class CFLViolation(MTFlockError):
    pass


class MassLossExceeded(MTFlockError):
    pass


class NegativeDensity(MTFlockError):
    pass


class NonFiniteState(MTFlockError):
    pass


class ParticleOutsideDomain(MTFlockError, ValueError):
    pass


class InsufficientSnapshots(MTFlockError, ValueError):
    pass


class ConfigError(MTFlockError, ValueError):
    exit_code = 2


class ParseError(ConfigError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ValidationError(ConfigError):
    def __init__(self, key, reason, line=None):
        self.key = key
        self.reason = reason
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{key}: {reason}{where}")


class UnknownKey(ConfigError):
    def __init__(self, key, line=None):
        self.key = key
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"unknown key {key!r}{where}")
