"""Domain types, unit conventions and parameter validation.

All quantities are carried in whatever consistent units the caller picks.
The command line works in natural units with ``gamma = v_g = 1`` so that
times are reported as Gamma*t and widths as v_g*kappa/Gamma.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import (
    ConfigError,
    NonPositiveRate,
    PlaneWaveProbability,
    WidthExceedsLinewidth,
)

__all__ = [
    "SystemParams",
    "PlaneWave",
    "Lorentzian",
    "Gaussian",
    "WavepacketSpec",
    "PhotonConfiguration",
    "ProbabilityCurve",
    "CheckedConfig",
    "validate",
]


@dataclass(frozen=True)
class SystemParams:
    """Emitter and waveguide constants.

    Parameters
    ----------
    gamma : float
        Decay rate into the chiral channel.
    omega : float
        Atomic transition frequency.
    omega_k : float
        Carrier frequency of the incident field, ``v_g * k``.
    v_g : float
        Group velocity.
    n_photons : int
        Photon number N of the incident Fock state.
    """

    gamma: float = 1.0
    omega: float = 0.0
    omega_k: float = 0.0
    v_g: float = 1.0
    n_photons: int = 1

    def __post_init__(self):
        if isinstance(self.n_photons, bool) or int(self.n_photons) != self.n_photons:
            raise ConfigError(f"n_photons must be an integer, got {self.n_photons!r}")
        object.__setattr__(self, "n_photons", int(self.n_photons))
        for name in ("gamma", "omega", "omega_k", "v_g"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_detuning(cls, delta, n_photons=1, gamma=1.0, v_g=1.0, omega=0.0):
        """Build parameters from the detuning ``omega_k - omega``."""
        return cls(gamma=gamma, omega=omega, omega_k=omega + delta, v_g=v_g, n_photons=n_photons)

    @property
    def delta(self) -> float:
        return self.omega_k - self.omega

    @property
    def coupling(self) -> float:
        """Real-space coupling V with gamma = V**2 / (2 v_g)."""
        return math.sqrt(2.0 * self.v_g * self.gamma)

    @property
    def k(self) -> float:
        return self.omega_k / self.v_g

    def replace(self, **changes) -> "SystemParams":
        values = dict(gamma=self.gamma, omega=self.omega, omega_k=self.omega_k,
                      v_g=self.v_g, n_photons=self.n_photons)
        values.update(changes)
        return SystemParams(**values)


def _check_carrier(k, params):
    if k is not None and params is not None:
        if not math.isclose(k * params.v_g, params.omega_k, rel_tol=1e-12, abs_tol=1e-12):
            raise ConfigError(
                f"carrier k={k} inconsistent with omega_k={params.omega_k} and v_g={params.v_g}")


@dataclass(frozen=True)
class PlaneWave:
    """Monochromatic input. Not normalizable, so probabilities reject it."""

    k: float | None = None

    name = "plane"


@dataclass(frozen=True)
class Lorentzian:
    """Exponential real-space envelope ``sqrt(kappa) exp(-kappa |x|)``."""

    kappa: float
    k: float | None = None

    name = "lorentzian"


@dataclass(frozen=True)
class Gaussian:
    """Gaussian envelope ``(pi d^2)^(-1/4) exp(-x^2 / (2 d^2))``."""

    d: float
    k: float | None = None

    name = "gaussian"


WavepacketSpec = Union[PlaneWave, Lorentzian, Gaussian]


@dataclass(frozen=True)
class PhotonConfiguration:
    """Positions of the N-1 photons that remain while the atom is excited."""

    coords: tuple
    t: float

    def __post_init__(self):
        coords = tuple(float(x) for x in np.atleast_1d(np.asarray(self.coords, dtype=float)))
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "t", float(self.t))
        if not all(math.isfinite(x) for x in coords) or not math.isfinite(self.t):
            raise ConfigError("photon configuration must be finite")
        if self.t < 0:
            raise ConfigError(f"time must be non-negative, got {self.t}")

    def check(self, params: SystemParams):
        if len(self.coords) != params.n_photons - 1:
            raise ConfigError(
                f"expected {params.n_photons - 1} coordinates, got {len(self.coords)}")
        return self


_BOUNDED_METHODS = {"closed", "quadrature", "mc", "oracle", "coherent"}


@dataclass(frozen=True)
class ProbabilityCurve:
    """Sampled excitation probability with per-point standard errors.

    ``method`` records how the values were produced: ``closed``,
    ``quadrature``, ``mc``, ``oracle``, ``coherent``, ``asymptotic`` or
    ``series``.  Asymptotic formulas are not bounded by one.
    """

    times: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray
    method: str
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float)
        errs = np.zeros_like(values) if self.std_errors is None else np.array(self.std_errors, dtype=float)
        if times.ndim != 1 or values.shape != times.shape or errs.shape != times.shape:
            raise ConfigError("times, values and std_errors must be 1-D arrays of equal length")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ConfigError("times must be strictly increasing")
        if self.method in _BOUNDED_METHODS:
            slack = 3.0 * errs + 1e-9
            if np.any(values < -slack) or np.any(values > 1.0 + slack):
                raise ConfigError(f"{self.method} probabilities outside [0, 1 + 3 sigma]")
        for arr in (times, values, errs):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "std_errors", errs)

    def __len__(self):
        return self.times.size

    @property
    def peak(self):
        """Return ``(t, p)`` at the largest sampled value."""
        i = int(np.argmax(self.values))
        return float(self.times[i]), float(self.values[i])


@dataclass(frozen=True)
class CheckedConfig:
    """Validated parameters plus derived quantities."""

    params: SystemParams
    packet: WavepacketSpec
    coupling: float
    delta: float
    gamma_eff: float
    plane_wave: bool
    wide_band: bool

    def require_normalizable(self):
        if self.plane_wave:
            raise PlaneWaveProbability("plane-wave inputs have no normalizable probability")
        return self


def validate(params: SystemParams, packet: WavepacketSpec) -> CheckedConfig:
    """Check a parameter set and precompute V, the detuning and gamma_eff.

    Raises
    ------
    NonPositiveRate
        If ``gamma`` or ``v_g`` is not strictly positive.
    ConfigError
        For non-positive packet widths, N < 1 or an inconsistent carrier.

    Warns
    -----
    WidthExceedsLinewidth
        When ``v_g * kappa > gamma`` for a Lorentzian packet.
    """
    if params.gamma <= 0:
        raise NonPositiveRate(f"gamma must be positive, got {params.gamma}")
    if params.v_g <= 0:
        raise NonPositiveRate(f"v_g must be positive, got {params.v_g}")
    if params.n_photons < 1:
        raise ConfigError(f"n_photons must be >= 1, got {params.n_photons}")
    _check_carrier(getattr(packet, "k", None), params)

    gamma_eff = params.gamma
    wide = False
    if isinstance(packet, Lorentzian):
        if not (packet.kappa > 0 and math.isfinite(packet.kappa)):
            raise ConfigError(f"kappa must be positive, got {packet.kappa}")
        gamma_eff = params.gamma - params.v_g * packet.kappa
        if params.v_g * packet.kappa > params.gamma:
            wide = True
            warnings.warn(
                f"v_g*kappa={params.v_g * packet.kappa:g} exceeds gamma={params.gamma:g}; "
                "the kernel grows exponentially in time",
                WidthExceedsLinewidth, stacklevel=2)
    elif isinstance(packet, Gaussian):
        if not (packet.d > 0 and math.isfinite(packet.d)):
            raise ConfigError(f"d must be positive, got {packet.d}")
    elif not isinstance(packet, PlaneWave):
        raise ConfigError(f"unknown packet type {type(packet).__name__}")

    return CheckedConfig(
        params=params,
        packet=packet,
        coupling=params.coupling,
        delta=params.delta,
        gamma_eff=gamma_eff,
        plane_wave=isinstance(packet, PlaneWave),
        wide_band=wide,
    )
