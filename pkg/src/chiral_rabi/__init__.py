"""Excitation dynamics of a two-level emitter driven by N-photon pulses in a
chiral waveguide."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Gaussian,
    Lorentzian,
    PhotonConfiguration,
    PlaneWave,
    ProbabilityCurve,
    SystemParams,
    validate,
)
from .errors import ChiralRabiError, WidthExceedsLinewidth  # noqa: E402

__all__ = [
    "Gaussian",
    "Lorentzian",
    "PhotonConfiguration",
    "PlaneWave",
    "ProbabilityCurve",
    "SystemParams",
    "validate",
    "ChiralRabiError",
    "WidthExceedsLinewidth",
]
