"""Exception types shared across the package.

Every error carries a short message; solver errors also keep the
self-similar time at which they were raised so run reports can show it.
"""


class TvBurgersError(Exception):
    """Base class for all package errors."""


# numerics
class NoBracket(TvBurgersError):
    pass


class MaxIters(TvBurgersError):
    pass


class ZeroPivot(TvBurgersError):
    pass


class DomainTooSmall(TvBurgersError):
    pass


class GridTooCoarse(TvBurgersError):
    pass


# profiles / spectral
class IndexOutOfRange(TvBurgersError):
    pass


class ProfileVanishes(TvBurgersError):
    pass


class InsufficientDerivatives(TvBurgersError):
    pass


class AxisOrderViolation(TvBurgersError):
    pass


# dss
class SeedInvalid(TvBurgersError):
    pass


class InversionFailure(TvBurgersError):
    pass


# burgers1d
class NoNegativeSlope(TvBurgersError):
    pass


class DegeneracyUndetermined(TvBurgersError):
    pass


class PastBlowup(TvBurgersError):
    pass


# time steppers
class SolverError(TvBurgersError):
    def __init__(self, message, s=None):
        super().__init__(message if s is None else f"{message} (s = {s:.6g})")
        self.s = s


class StabilityViolated(SolverError):
    pass


class NonPositiveF(SolverError):
    pass


class CharacteristicEscape(SolverError):
    pass


class DegenerateProjection(SolverError):
    pass


# cli
class ConfigError(TvBurgersError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownKey(ConfigError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class TypeMismatch(ConfigError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
