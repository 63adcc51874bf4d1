"""Excited-state amplitudes e(x_1..x_{N-1}; t).

``e`` is the amplitude for the atom to be excited at time ``t`` while the
remaining N-1 photons sit at ``x_1..x_{N-1}``.  Plane-wave and Lorentzian
inputs reduce to prefactor * envelope * bracket.  Gaussian inputs have no
such factorization and are summed chain by chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .combinatorics import (
    ENUMERATION_CAP,
    BracketInput,
    bracket_fast,
)
from .core import (
    Gaussian,
    Lorentzian,
    PhotonConfiguration,
    PlaneWave,
    SystemParams,
    WavepacketSpec,
    validate,
)
from .errors import ConfigError, DegenerateCoefficient, EnumerationCapExceeded
from .special import PhiKernel, gaussian_I_scaled, scattering_weight

__all__ = [
    "AmplitudePrefactor",
    "plane_prefactor",
    "lorentzian_prefactor",
    "bracket_input",
    "evaluate_plane",
    "evaluate_lorentzian",
    "evaluate_gaussian",
    "evaluate",
    "order_decomposition",
    "product_packet_amplitude",
]


@dataclass(frozen=True)
class AmplitudePrefactor:
    value: complex

    @property
    def abs2(self) -> float:
        return abs(self.value) ** 2


def _denominator(delta, gamma_eff):
    if delta == 0 and gamma_eff == 0:
        raise DegenerateCoefficient("delta + i*gamma_eff vanishes")
    return complex(delta, gamma_eff)


def plane_prefactor(params: SystemParams) -> AmplitudePrefactor:
    """``-i sqrt(N) V / ((2 pi)^(N/2) (delta + i gamma))``."""
    N = params.n_photons
    val = -1j * math.sqrt(N) * params.coupling / (
        (2 * math.pi) ** (N / 2) * _denominator(params.delta, params.gamma))
    return AmplitudePrefactor(val)


def lorentzian_prefactor(params: SystemParams, kappa: float) -> AmplitudePrefactor:
    """``-i sqrt(N) V kappa^(N/2) / (delta + i (gamma - v_g kappa))``.

    ``|A|^2 = 2 N v_g gamma kappa^N / (delta^2 + (gamma - v_g kappa)^2)``.
    """
    N = params.n_photons
    gamma_eff = params.gamma - params.v_g * kappa
    val = -1j * math.sqrt(N) * params.coupling * kappa ** (N / 2) / _denominator(
        params.delta, gamma_eff)
    return AmplitudePrefactor(val)


def bracket_input(config: PhotonConfiguration, params: SystemParams,
                  packet: WavepacketSpec) -> BracketInput:
    """Bracket arguments for a plane-wave or Lorentzian amplitude.

    The effective transmission is chosen so that ``1 - t_k`` equals the
    per-absorption weight ``2i gamma / (delta + i gamma_eff)``.  For a plane
    wave this is the ordinary chiral transmission coefficient.
    """
    if isinstance(packet, Lorentzian):
        gamma_eff = params.gamma - params.v_g * packet.kappa
    elif isinstance(packet, PlaneWave):
        gamma_eff = params.gamma
    else:
        raise ConfigError("bracket factorization needs a plane-wave or Lorentzian packet")
    kernel = PhiKernel(params.delta, gamma_eff)
    t_k = 1.0 - scattering_weight(params.delta, params.gamma, gamma_eff)
    return BracketInput(config.coords, config.t, kernel, t_k, params.v_g)


def _carrier_phase(config, params, k):
    x = np.asarray(config.coords, dtype=float)
    return np.exp(1j * np.sum(k * x - params.omega_k * config.t))


def _plane_parts(config, params, k):
    config.check(params)
    validate(params, PlaneWave())
    k = params.k if k is None else k
    pref = plane_prefactor(params).value
    env = np.exp(-1j * params.delta * config.t) * _carrier_phase(config, params, k)
    return pref * env, bracket_fast(bracket_input(config, params, PlaneWave()))


def evaluate_plane(config: PhotonConfiguration, params: SystemParams,
                   k: float | None = None) -> complex:
    """Plane-wave amplitude. ``k`` defaults to ``omega_k / v_g``."""
    scale, br = _plane_parts(config, params, k)
    return complex(scale * br.value)


def _lorentzian_parts(config, params, packet):
    config.check(params)
    validate(params, packet)
    kappa = packet.kappa
    x = np.asarray(config.coords, dtype=float)
    pref = lorentzian_prefactor(params, kappa).value
    env = (np.exp(-1j * complex(params.delta, -params.v_g * kappa) * config.t)
           * _carrier_phase(config, params, params.k)
           * np.exp(-kappa * np.sum(np.abs(x - params.v_g * config.t))))
    return pref * env, bracket_fast(bracket_input(config, params, packet))


def evaluate_lorentzian(config: PhotonConfiguration, params: SystemParams,
                        packet: Lorentzian) -> complex:
    """Amplitude for an N-photon Lorentzian packet centred at the origin at
    ``t = 0``."""
    scale, br = _lorentzian_parts(config, params, packet)
    return complex(scale * br.value)


def product_packet_amplitude(coords, t, params: SystemParams, envelope, segment, tail,
                             cap: int = ENUMERATION_CAP):
    """Amplitude for a product of identical single-photon envelopes ``u``.

    Iterating the coupled equations of motion gives, with the overall phase
    chosen to match the plane-wave and Lorentzian prefactors,

        e = sqrt(N) V [ prod_i u(x_i - v_g t) beta(t)
            + sum_chains (-V^2/v_g)^j exp(i Omega y_last / v_g)
              prod_{i not in chain} u(x_i - v_g t)
              prod_m F(y_{m-1}, y_m) beta(t - y_last / v_g) ]

    over increasing chains ``0 < y_0 < ... < y_last < v_g t``, with
    ``y_{-1} = 0``.

    Parameters
    ----------
    envelope : callable
        ``u(y)``, vectorized.
    segment : callable
        ``F(y_prev, y_next)``, the integral of ``exp(-i Omega~ tau)
        u(y_prev - v_g t + v_g tau)`` over ``tau`` in ``[0, (y_next -
        y_prev) / v_g]``, with ``Omega~ = Omega - i gamma``.
    tail : callable
        ``beta(s) = exp(i Omega s) int_0^s exp(-i Omega~ tau)
        u(v_g (tau - s)) d tau``.

    Returns
    -------
    terms : ndarray of complex
        Contribution of each chain length ``j = 0..N-1``.
    """
    x = np.asarray(coords, dtype=float)
    n = x.size
    if n > cap:
        raise EnumerationCapExceeded(f"{n} coordinates exceed the enumeration cap {cap}")
    vg = params.v_g
    N = params.n_photons
    scale = math.sqrt(N) * params.coupling
    free = envelope(x - vg * t) if n else np.ones(0, dtype=complex)
    terms = np.zeros(n + 1, dtype=complex)
    terms[0] = scale * np.prod(free) * tail(t)
    order = np.argsort(x, kind="stable")
    active = [i for i in order if 0.0 <= x[i] <= vg * t]
    cpl = -params.coupling**2 / vg
    for j in range(1, len(active) + 1):
        acc = 0j
        # increasing chains are exactly the j-subsets of the sorted actives
        for chain in combinations(active, j):
            rest = np.ones(n, dtype=bool)
            rest[list(chain)] = False
            val = np.prod(free[rest]) if rest.any() else 1.0
            prev = 0.0
            for i in chain:
                val *= segment(prev, x[i])
                prev = x[i]
            acc += val * np.exp(1j * params.omega * prev / vg) * tail(t - prev / vg)
        terms[j] = scale * cpl**j * acc
    return terms


def _gaussian_terms(config, params, packet, cap):
    config.check(params)
    validate(params, packet)
    d, vg, t = packet.d, params.v_g, config.t
    nd = (math.pi * d * d) ** -0.25
    k = params.k

    def envelope(y):
        return nd * np.exp(-0.5 * (y / d) ** 2 + 1j * k * y)

    def segment(y_prev, y_next):
        t_m = t - y_prev / vg
        return nd * np.exp(-1j * params.omega_k * t_m) * gaussian_I_scaled(
            t_m, (y_next - y_prev) / vg, params, d)

    def tail(s):
        return nd * np.exp(-1j * params.delta * s) * gaussian_I_scaled(s, s, params, d)

    return product_packet_amplitude(config.coords, t, params, envelope, segment, tail, cap)


def evaluate_gaussian(config: PhotonConfiguration, params: SystemParams,
                      packet: Gaussian, cap: int = ENUMERATION_CAP) -> complex:
    """Amplitude for a Gaussian packet of width ``d`` centred at the origin.

    Summed over explicit chains, so the cost grows like ``2^(N-1)``; inputs
    with more than ``cap`` coordinates are refused.
    """
    return complex(np.sum(_gaussian_terms(config, params, packet, cap)))


def evaluate(config: PhotonConfiguration, params: SystemParams,
             packet: WavepacketSpec) -> complex:
    """Dispatch on packet shape."""
    if isinstance(packet, Lorentzian):
        return evaluate_lorentzian(config, params, packet)
    if isinstance(packet, Gaussian):
        return evaluate_gaussian(config, params, packet)
    if isinstance(packet, PlaneWave):
        return evaluate_plane(config, params, packet.k)
    raise ConfigError(f"unknown packet type {type(packet).__name__}")


def order_decomposition(config: PhotonConfiguration, params: SystemParams,
                        packet: WavepacketSpec) -> np.ndarray:
    """Amplitude split by the number of earlier absorptions.

    Returns ``K^(0) .. K^(N-1)``; their sum is the full amplitude.
    """
    if isinstance(packet, Gaussian):
        return _gaussian_terms(config, params, packet, ENUMERATION_CAP)
    if isinstance(packet, Lorentzian):
        scale, br = _lorentzian_parts(config, params, packet)
    elif isinstance(packet, PlaneWave):
        scale, br = _plane_parts(config, params, packet.k)
    else:
        raise ConfigError(f"unknown packet type {type(packet).__name__}")
    return scale * np.asarray(br.decomposition.terms)
