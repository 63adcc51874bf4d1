"""Scalar special functions used by the analytic amplitudes.

The Faddeeva function ``w(z) = exp(-z^2) erfc(-iz)`` from scipy is the
workhorse: the Gaussian time integral is written in terms of it so that no
``exp(z^2)`` factor is ever formed explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .core import SystemParams
from .errors import ConfigError, DegenerateCoefficient, RangeExceeded

__all__ = [
    "PhiKernel",
    "phi",
    "transmission",
    "scattering_weight",
    "complex_erf",
    "gaussian_I",
    "gaussian_I_scaled",
    "K_cal",
    "ERF_SAFE_RANGE",
]

ERF_SAFE_RANGE = 8.0


@dataclass(frozen=True)
class PhiKernel:
    """Parameters of ``phi(t) = exp(i delta t) exp(-gamma_eff t) - 1``."""

    delta: float
    gamma_eff: float

    @property
    def rate(self) -> complex:
        return complex(-self.gamma_eff, self.delta)

    def __call__(self, t):
        return phi(self, t)


def phi(kernel: PhiKernel, t):
    """Evaluate the single-emitter kernel.

    Uses ``expm1`` so that ``phi(t) = O(t)`` keeps full relative precision
    near ``t = 0``.  Accepts scalars or arrays.
    """
    out = np.expm1(kernel.rate * np.asarray(t, dtype=float))
    return complex(out) if np.ndim(out) == 0 else out


def transmission(delta: float, gamma_eff: float) -> complex:
    """Chiral single-photon transmission ``(delta - i g) / (delta + i g)``."""
    if delta == 0 and gamma_eff == 0:
        raise DegenerateCoefficient("transmission undefined for delta = gamma_eff = 0")
    return complex(delta, -gamma_eff) / complex(delta, gamma_eff)


def scattering_weight(delta: float, gamma: float, gamma_eff: float) -> complex:
    """Per-absorption weight multiplying each order of the bracket.

    Equal to ``2i gamma / (delta + i gamma_eff)``.  For a plane wave
    (``gamma_eff == gamma``) this is ``1 - transmission(delta, gamma)``.
    For a Lorentzian packet the numerator keeps the bare ``gamma`` because
    it comes from ``V**2 / v_g``, while the denominator inherits the
    packet-shifted rate.
    """
    if delta == 0 and gamma_eff == 0:
        raise DegenerateCoefficient("scattering weight undefined for delta = gamma_eff = 0")
    return 2j * gamma / complex(delta, gamma_eff)


def complex_erf(z, safe_range: float = ERF_SAFE_RANGE):
    """Error function of a complex argument.

    Parameters
    ----------
    z : complex or array_like
    safe_range : float
        Largest admissible ``|Im z|``. Beyond it ``erf`` grows like
        ``exp(Im(z)**2)`` and loses meaning as a finite double.

    Raises
    ------
    RangeExceeded
    """
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z.imag) > safe_range) or not np.all(np.isfinite(z)):
        raise RangeExceeded(f"|Im z| exceeds the safe range {safe_range}")
    out = _sp.erf(z)
    return complex(out) if out.ndim == 0 else out


def _scaled_w(z, log_scale):
    """``exp(log_scale) * w(+-i z)`` evaluated in the bounded half plane.

    Returns the product and a mask of points where ``Re z < 0`` so that the
    caller can add the reflection term ``2 exp(log_scale + z^2)``, using
    ``w(i z) = 2 exp(z^2) - w(-i z)``.
    """
    neg = z.real < 0
    base = np.exp(log_scale) * _sp.wofz(1j * np.where(neg, -z, z))
    return np.where(neg, -base, base), neg


def gaussian_I_scaled(t_m, upper_limit, params: SystemParams, d: float):
    """``exp(-a t_m^2)`` times the Gaussian time integral.

    This is the combination that appears in the amplitudes.  Both
    reflection terms share the exponent ``z1^2 - a t_m^2``, which stays
    bounded, so the result is finite wherever the amplitude is.
    """
    if not d > 0:
        raise ConfigError(f"d must be positive, got {d}")
    a = params.v_g**2 / (2.0 * d * d)
    sa = math.sqrt(a)
    tm = np.asarray(t_m, dtype=float)
    T = np.asarray(upper_limit, dtype=float)
    rate = complex(params.gamma, -params.delta)
    b = rate - params.v_g**2 * tm / (d * d)
    z1 = b / (2.0 * sa)
    z2 = z1 + sa * T
    log1 = -a * tm * tm + 0j
    log2 = -a * (tm - T) ** 2 - rate * T
    w1, neg1 = _scaled_w(z1, log1)
    w2, neg2 = _scaled_w(z2, log2)
    # z2 - z1 = sqrt(a) T >= 0, so neg2 implies neg1.  The two reflection
    # terms share one exponent and cancel when both are present.
    with np.errstate(over="ignore", invalid="ignore"):
        refl = np.where(neg1 & ~neg2, 2.0 * np.exp(log1 + z1 * z1), 0.0)
    val = 0.5 * math.sqrt(math.pi / a) * (w1 - w2 + refl)
    val = np.where(T == 0, 0.0, val)
    if not np.all(np.isfinite(val)):
        raise RangeExceeded("Gaussian time integral overflowed")
    return complex(val) if val.ndim == 0 else val


def gaussian_I(t_m, upper_limit, params: SystemParams, d: float):
    """Gaussian time integral for retarded time ``t_m``.

    Computes ``int_0^T exp(-a tau^2 - b tau) d tau`` with
    ``a = v_g^2 / (2 d^2)`` and ``b = gamma - i delta - v_g^2 t_m / d^2``,
    i.e. ``-i (omega_k - Omega~ - i v_g^2 t_m / d^2)`` with
    ``Omega~ = Omega - i gamma``.

    The erf difference ``erf(sqrt(a) (T + b/2a)) - erf(b / (2 sqrt a))`` is
    rewritten with the Faddeeva function,
    ``0.5 sqrt(pi/a) [w(i z1) - exp(-a T^2 - b T) w(i z2)]``,
    ``z1 = b / (2 sqrt a)``, ``z2 = z1 + sqrt(a) T``, which avoids the
    overflow of ``exp(z1^2)``.  Vectorized over ``t_m`` and ``upper_limit``.

    Raises
    ------
    RangeExceeded
        If the result is not a finite double.
    """
    a = params.v_g**2 / (2.0 * d * d) if d > 0 else 0.0
    scaled = gaussian_I_scaled(t_m, upper_limit, params, d)
    tm = np.asarray(t_m, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.asarray(scaled) * np.exp(a * tm * tm)
    if not np.all(np.isfinite(val)):
        raise RangeExceeded("Gaussian time integral overflowed")
    return complex(val) if val.ndim == 0 else val


def K_cal(j: int, x):
    """``K_j(x) = x^(2j+1) / (2j+1)!``, the closed form of the recursion
    ``K_j(x) = int_0^x (x - x') K_{j-1}(x') dx'`` with ``K_0(x) = x``."""
    if j < 0:
        raise ConfigError("j must be non-negative")
    out = np.asarray(x, dtype=float) ** (2 * j + 1) / math.factorial(2 * j + 1)
    return float(out) if out.ndim == 0 else out
