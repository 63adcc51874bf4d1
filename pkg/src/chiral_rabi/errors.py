"""Exception and warning types shared across the package.

Every error carries an ``exit_code`` so the command line front end can map
failures onto its documented status codes without a lookup table.
"""


class ChiralRabiError(Exception):
    """Base class for all package errors."""

    exit_code = 1
    kind = "Error"

    def to_dict(self):
        return {"error": self.kind, "message": str(self)}


class ConfigError(ChiralRabiError, ValueError):
    exit_code = 2
    kind = "ConfigError"


class NonPositiveRate(ConfigError):
    kind = "NonPositiveRate"


class PlaneWaveProbability(ConfigError):
    kind = "PlaneWaveProbability"


class DegenerateCoefficient(ConfigError):
    kind = "DegenerateCoefficient"


class EnumerationCapExceeded(ConfigError):
    kind = "EnumerationCapExceeded"


class DimensionGuard(ConfigError):
    kind = "DimensionGuard"


class BandwidthMismatch(ConfigError):
    kind = "BandwidthMismatch"


class WrapTimeExceeded(ConfigError):
    kind = "WrapTimeExceeded"


class NumericalError(ChiralRabiError, ArithmeticError):
    exit_code = 3
    kind = "NumericalError"


class RangeExceeded(NumericalError):
    kind = "RangeExceeded"


class QuadratureNotConverged(NumericalError):
    kind = "QuadratureNotConverged"


class NormDrift(NumericalError):
    kind = "NormDrift"


class TruncationTooSevere(NumericalError):
    kind = "TruncationTooSevere"


class NotConverged(NumericalError):
    kind = "NotConverged"


class WidthExceedsLinewidth(UserWarning):
    """The packet bandwidth v_g*kappa exceeds the emitter linewidth.

    The kernel exp((i*delta - gamma_eff) t) - 1 then grows without bound.
    """
