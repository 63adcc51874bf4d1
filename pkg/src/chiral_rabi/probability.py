"""Excitation probabilities p_N(t).

Closed forms for N = 1, 2, nested quadrature for N <= 3, importance-sampled
Monte Carlo for any N, the textbook asymptotic limits, the Rabi power
series and Poisson averaging over photon number.
"""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate, special, stats

from .combinatorics import BracketInput, bracket_abs2_batch, bracket_fast
from .core import (
    Gaussian,
    Lorentzian,
    PlaneWave,
    ProbabilityCurve,
    SystemParams,
    WavepacketSpec,
    validate,
)
from .errors import (
    ConfigError,
    PlaneWaveProbability,
    QuadratureNotConverged,
    TruncationTooSevere,
)
from .special import PhiKernel, gaussian_I_scaled, scattering_weight
from .wavefunction import product_packet_amplitude

__all__ = [
    "McConfig",
    "Regime",
    "RegimeReport",
    "RabiFrequencies",
    "p1_closed",
    "p2_closed",
    "p_quadrature",
    "p_monte_carlo",
    "asymptotic_probability",
    "asymptotic_curve",
    "classify_regime",
    "chi",
    "rabi_series",
    "coherent_average",
    "rabi_frequency",
    "semiclassical_probability",
    "kappa_for_rabi",
]

# thresholds for the regime report
WEAK_FIELD_NVK = 0.01
WEAK_FIELD_GT = 0.1
LARGE_DETUNING = 20.0
STRONG_PUMPING_G = 10.0

MAX_TAIL_MASS = 1e-6
_CHUNK = 8192


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings.

    Results are a deterministic function of ``(seed, n_workers)``; each
    worker draws from its own Philox stream keyed by the time index.
    """

    n_samples: int = 100_000
    seed: int = 0
    n_workers: int = 1

    def __post_init__(self):
        if int(self.n_samples) < 1:
            raise ConfigError("n_samples must be >= 1")
        if int(self.n_workers) < 1:
            raise ConfigError("n_workers must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")


class Regime(str, enum.Enum):
    WEAK_FIELD = "WeakField"
    LARGE_DETUNING = "LargeDetuning"
    STRONG_PUMPING = "StrongPumping"
    NONE = "None"


@dataclass(frozen=True)
class RegimeReport:
    tag: Regime
    applicable: tuple
    n_vk: float
    delta_ratio: float
    gamma_t: float
    g_ratio: float


@dataclass(frozen=True)
class RabiFrequencies:
    g0: float
    g: float
    omega_r: float

    def pulse_area(self, t):
        return self.g * np.asarray(t, dtype=float)


def _lorentzian_check(params, kappa):
    validate(params, Lorentzian(kappa))
    gamma_eff = params.gamma - params.v_g * kappa
    return gamma_eff, params.delta**2 + gamma_eff**2


def _times(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ConfigError("times must be non-negative")
    return t


def p1_closed(t, params: SystemParams, kappa: float):
    """Single-photon excitation probability for a Lorentzian packet.

    ``2 v_g kappa gamma exp(-2 v_g kappa t) |phi(t)|^2 / (delta^2 + gamma_eff^2)``.
    """
    gamma_eff, den = _lorentzian_check(params, kappa)
    t = _times(t)
    vk = params.v_g * kappa
    ph = np.expm1(complex(-gamma_eff, params.delta) * t)
    out = 2 * vk * params.gamma * np.exp(-2 * vk * t) * np.abs(ph) ** 2 / den
    return float(out) if out.ndim == 0 else out


def _quad(f, a, b, tol):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=1e-10, limit=200)
    if not (math.isfinite(val) and err <= max(10 * tol, 1e-10 * abs(val))):
        raise QuadratureNotConverged(f"quadrature error estimate {err:.3g} exceeds {tol:.3g}")
    return val


def p2_closed(t, params: SystemParams, kappa: float, quad_tol: float = 1e-10):
    """Two-photon excitation probability for a Lorentzian packet.

    ``4 v_g kappa gamma e^{-2 v_g kappa t} / (delta^2 + gamma_eff^2)`` times
    ``|phi(t)|^2 + kappa int_0^{v_g t} dx e^{-2 kappa (v_g t - x)}
    [2 Re(conj(phi(t)) c phi(x/v_g) phi(t - x/v_g)) + |c phi(x/v_g) phi(t - x/v_g)|^2]``
    with ``c = 2i gamma / (delta + i gamma_eff)``.  The first part equals
    ``2 p1``.
    """
    gamma_eff, den = _lorentzian_check(params, kappa)
    vg, vk = params.v_g, params.v_g * kappa
    rate = complex(-gamma_eff, params.delta)
    c = scattering_weight(params.delta, params.gamma, gamma_eff)
    pref_c = 4 * vk * params.gamma / den

    def one(tt):
        if tt == 0:
            return 0.0
        ft = np.expm1(rate * tt)
        pref = pref_c * math.exp(-2 * vk * tt)

        def integrand(x):
            chain = c * np.expm1(rate * x / vg) * np.expm1(rate * (tt - x / vg))
            return math.exp(-2 * kappa * (vg * tt - x)) * (
                2 * (np.conj(ft) * chain).real + abs(chain) ** 2)

        tol = quad_tol / max(pref * kappa, 1e-300)
        return pref * (abs(ft) ** 2 + kappa * _quad(integrand, 0.0, vg * tt, tol))

    t = _times(t)
    out = np.vectorize(one, otypes=[float])(t)
    return float(out) if out.ndim == 0 else out


class _Sector:
    """Squared amplitudes restricted to a set of coordinates inside (0, v_g t).

    Photons outside that interval never absorbed, so the amplitude factors
    into their free envelopes times a function of the others.
    ``active_abs2(xs)`` returns that function squared; ``p_inside`` is the
    envelope weight of one photon inside the interval.
    """

    def __init__(self, t, params, packet):
        self.t, self.params = t, params
        vg = params.v_g
        if isinstance(packet, Lorentzian):
            kappa = packet.kappa
            gamma_eff, den = _lorentzian_check(params, kappa)
            self.kernel = PhiKernel(params.delta, gamma_eff)
            self.t_k = 1.0 - scattering_weight(params.delta, params.gamma, gamma_eff)
            N = params.n_photons
            self.scale = (2 * N * vg * params.gamma * kappa / den
                          * math.exp(-2 * vg * kappa * t))
            self.kappa = kappa
            self.p_inside = -0.5 * math.expm1(-2 * kappa * vg * t)
            self._abs2 = self._lorentzian
        elif isinstance(packet, Gaussian):
            validate(params, packet)
            d = packet.d
            self.d = d
            self.nd = (math.pi * d * d) ** -0.25
            self.p_inside = 0.5 * math.erf(vg * t / d)
            self._abs2 = self._gaussian
        elif isinstance(packet, PlaneWave):
            raise PlaneWaveProbability("plane-wave inputs have no normalizable probability")
        else:
            raise ConfigError(f"unknown packet type {type(packet).__name__}")

    def _lorentzian(self, xs):
        xs = np.asarray(xs, dtype=float)
        b = bracket_fast(BracketInput(xs, self.t, self.kernel, self.t_k, self.params.v_g)).value
        w = np.prod(self.kappa * np.exp(-2 * self.kappa * np.abs(xs - self.params.v_g * self.t)))
        return self.scale * w * abs(b) ** 2

    def _gaussian(self, xs):
        p, d, nd, t = self.params, self.d, self.nd, self.t
        vg = p.v_g

        def envelope(y):
            return nd * np.exp(-0.5 * (y / d) ** 2 + 1j * p.k * y)

        def segment(y_prev, y_next):
            t_m = t - y_prev / vg
            return nd * np.exp(-1j * p.omega_k * t_m) * gaussian_I_scaled(
                t_m, (y_next - y_prev) / vg, p, d)

        def tail(s):
            return nd * np.exp(-1j * p.delta * s) * gaussian_I_scaled(s, s, p, d)

        terms = product_packet_amplitude(xs, t, p, envelope, segment, tail)
        return abs(np.sum(terms)) ** 2

    def active_abs2(self, xs):
        return self._abs2(xs)


def p_quadrature(t, params: SystemParams, packet: WavepacketSpec, quad_tol: float = 1e-10):
    """Excitation probability by deterministic integration, N <= 3.

    Regions where every photon lies outside ``(0, v_g t)`` contribute the
    zeroth-order term times the envelope weight, which is known in closed
    form.  The rest is integrated adaptively over the interval (N = 2) or
    over the two ordered triangles of the square (N = 3).
    """
    N = params.n_photons
    if N > 3:
        raise ConfigError("deterministic quadrature supports N <= 3")

    def one(tt):
        if tt == 0:
            return 0.0
        sec = _Sector(tt, params, packet)
        L = params.v_g * tt
        out_w = 1.0 - sec.p_inside
        base = sec.active_abs2(np.zeros(0))
        if N == 1:
            return base
        single = _quad(lambda x: sec.active_abs2(np.array([x])), 0.0, L, quad_tol / 4)
        if N == 2:
            return base * out_w + single
        inner_tol = quad_tol / (4 * max(L, 1e-300))

        def row(x2):
            return _quad(lambda x1: sec.active_abs2(np.array([x1, x2])), 0.0, x2, inner_tol)

        double = 2.0 * _quad(row, 0.0, L, quad_tol / 4)
        return base * out_w**2 + 2.0 * out_w * single + double

    t = _times(t)
    out = np.vectorize(one, otypes=[float])(t)
    return float(out) if out.ndim == 0 else out


def _mc_stream(seed, t_index, worker):
    ss = np.random.SeedSequence(seed, spawn_key=(t_index, worker))
    return np.random.Generator(np.random.Philox(ss))


def _mc_worker(n, seed, t_index, worker, t, n_coords, kappa, v_g, rate, c):
    rng = _mc_stream(seed, t_index, worker)
    s1, s2 = [], []
    done = 0
    while done < n:
        m = min(_CHUNK, n - done)
        x = rng.laplace(v_g * t, 0.5 / kappa, size=(m, n_coords))
        vals = bracket_abs2_batch(x, t, rate, c, v_g)
        s1.append(math.fsum(vals))
        s2.append(math.fsum(vals * vals))
        done += m
    return s1, s2


def p_monte_carlo(t_grid, params: SystemParams, packet: Lorentzian,
                  mc: McConfig = McConfig()) -> ProbabilityCurve:
    """Importance-sampled excitation probability for a Lorentzian packet.

    Each photon coordinate is drawn from ``kappa exp(-2 kappa |x - v_g t|)``,
    the squared free envelope, which leaves ``|bracket|^2`` as the estimator:
    ``p = 2 N v_g kappa gamma e^{-2 v_g kappa t} / (delta^2 + gamma_eff^2)
    * E[|bracket|^2]``.  Worker partial sums are merged with ``math.fsum``
    so the result does not depend on completion order.
    """
    if not isinstance(packet, Lorentzian):
        if isinstance(packet, PlaneWave):
            raise PlaneWaveProbability("plane-wave inputs have no normalizable probability")
        raise ConfigError("Monte Carlo sampling is implemented for Lorentzian packets")
    kappa = packet.kappa
    gamma_eff, den = _lorentzian_check(params, kappa)
    times = _times(np.atleast_1d(t_grid))
    N = params.n_photons
    vg = params.v_g
    meta = {"n_samples": int(mc.n_samples), "seed": int(mc.seed), "n_workers": int(mc.n_workers)}
    if N == 1:
        return ProbabilityCurve(times, p1_closed(times, params, kappa), np.zeros_like(times),
                                "mc", meta)

    rate = complex(-gamma_eff, params.delta)
    c = scattering_weight(params.delta, params.gamma, gamma_eff)
    n, W = int(mc.n_samples), int(mc.n_workers)
    shares = [n // W + (1 if w < n % W else 0) for w in range(W)]
    values = np.zeros(times.size)
    errors = np.zeros(times.size)
    pool = ThreadPoolExecutor(max_workers=W) if W > 1 else None
    try:
        for i, t in enumerate(times):
            if t == 0:
                continue
            args = [(shares[w], int(mc.seed), i, w, float(t), N - 1, kappa, vg, rate, c)
                    for w in range(W) if shares[w] > 0]
            if pool is None:
                parts = [_mc_worker(*a) for a in args]
            else:
                parts = list(pool.map(lambda a: _mc_worker(*a), args))
            s1 = math.fsum(v for p in parts for v in p[0])
            s2 = math.fsum(v for p in parts for v in p[1])
            mean = s1 / n
            var = max(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
            pref = 2 * N * vg * kappa * params.gamma * math.exp(-2 * vg * kappa * t) / den
            values[i] = pref * mean
            errors[i] = pref * math.sqrt(var / n)
    finally:
        if pool is not None:
            pool.shutdown()
    return ProbabilityCurve(times, values, errors, "mc", meta)


def asymptotic_probability(regime, t, params: SystemParams, kappa: float):
    """Limiting forms with ``g^2 = 2 N v_g kappa gamma``.

    WeakField: ``g^2 t^2``.  LargeDetuning: ``(4 g^2 / delta^2)
    sin^2(delta t / 2)``.  StrongPumping: ``sin^2(g t)``.
    """
    regime = Regime(regime)
    t = np.asarray(t, dtype=float)
    g2 = 2 * params.n_photons * params.v_g * kappa * params.gamma
    if regime is Regime.WEAK_FIELD:
        out = g2 * t**2
    elif regime is Regime.LARGE_DETUNING:
        if params.delta == 0:
            raise ConfigError("large-detuning form needs delta != 0")
        out = 4 * g2 / params.delta**2 * np.sin(0.5 * params.delta * t) ** 2
    elif regime is Regime.STRONG_PUMPING:
        out = np.sin(math.sqrt(g2) * t) ** 2
    else:
        raise ConfigError("no asymptotic form for regime None")
    return float(out) if out.ndim == 0 else out


def asymptotic_curve(regime, t_grid, params, kappa) -> ProbabilityCurve:
    t = np.asarray(t_grid, dtype=float)
    return ProbabilityCurve(t, asymptotic_probability(regime, t, params, kappa),
                            np.zeros_like(t), "asymptotic", {"regime": Regime(regime).value})


def classify_regime(params: SystemParams, kappa: float, t: float) -> RegimeReport:
    """Tag a parameter set with the limit it sits in.

    Thresholds: WeakField when ``N v_g kappa < 0.01 gamma`` and
    ``gamma t < 0.1``; LargeDetuning when ``|delta| > 20 gamma``;
    StrongPumping when ``g > 10 gamma``.  When several apply the tag is
    the first of StrongPumping, LargeDetuning, WeakField; all are listed in
    ``applicable``.
    """
    G = params.gamma
    nvk = params.n_photons * params.v_g * kappa / G
    gt = G * float(t)
    dr = params.delta / G
    g = math.sqrt(2 * params.n_photons * params.v_g * kappa * G) / G
    found = []
    if g > STRONG_PUMPING_G:
        found.append(Regime.STRONG_PUMPING)
    if abs(dr) > LARGE_DETUNING:
        found.append(Regime.LARGE_DETUNING)
    if nvk < WEAK_FIELD_NVK and gt < WEAK_FIELD_GT:
        found.append(Regime.WEAK_FIELD)
    tag = found[0] if found else Regime.NONE
    return RegimeReport(tag, tuple(found), nvk, dr, gt, g)


def chi(n: int) -> Fraction:
    """Series coefficient ``2^(2n+1) / (2n+2)!`` as an exact fraction."""
    if n < 0:
        raise ConfigError("n must be non-negative")
    return Fraction(2 ** (2 * n + 1), math.factorial(2 * n + 2))


def rabi_series(gt, n_terms: int):
    """Partial sum ``sum_{n=0}^{n_terms} (-1)^n chi_n (g t)^(2n+2)``.

    ``n_terms = 1`` gives ``(gt)^2 - (gt)^4 / 3``; the full series is
    ``sin^2(g t)``.
    """
    if n_terms < 1:
        raise ConfigError("n_terms must be >= 1")
    x = np.asarray(gt, dtype=float) ** 2
    out = np.zeros_like(x)
    for n in range(n_terms + 1):
        out = out + (-1) ** n * float(chi(n)) * x ** (n + 1)
    return float(out) if out.ndim == 0 else out


def rabi_frequency(params: SystemParams, kappa: float) -> RabiFrequencies:
    """Vacuum Rabi frequency ``g0 = sqrt(2 v_g kappa gamma)`` and
    ``g = g0 sqrt(N)``.  ``pulse_area(t) = g t``."""
    if not kappa > 0:
        raise ConfigError("kappa must be positive")
    g0 = math.sqrt(2 * params.v_g * kappa * params.gamma)
    g = g0 * math.sqrt(params.n_photons)
    return RabiFrequencies(g0, g, g)


def kappa_for_rabi(g: float, params: SystemParams) -> float:
    """Packet width ``kappa`` giving Rabi frequency ``g`` at ``N`` photons."""
    return g * g / (2 * params.n_photons * params.v_g * params.gamma)


def semiclassical_probability(g, delta, t):
    """Generalized Rabi formula
    ``4 g^2 / (delta^2 + 4 g^2) sin^2(sqrt(delta^2/4 + g^2) t)``."""
    g = np.asarray(g, dtype=float)
    t = np.asarray(t, dtype=float)
    den = delta**2 + 4 * g**2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, 4 * g**2 / np.where(den > 0, den, 1.0), 0.0) * np.sin(
            np.sqrt(0.25 * delta**2 + g**2) * t) ** 2
    return float(out) if out.ndim == 0 else out


def _poisson_window(mean, truncation):
    sd = math.sqrt(mean)
    lo = max(0, math.floor(mean - truncation * sd))
    hi = math.ceil(mean + truncation * max(sd, 1.0))
    n = np.arange(lo, hi + 1)
    w = stats.poisson.pmf(n, mean)
    tail = float(stats.poisson.cdf(lo - 1, mean) + stats.poisson.sf(hi, mean)) if lo > 0 else \
        float(stats.poisson.sf(hi, mean))
    return n, w, tail


def coherent_average(alpha_sq: float, t_grid, params: SystemParams, kappa: float,
                     truncation: float = 10.0, exact_max_n: int = 3,
                     force_exact: bool = False, quad_tol: float = 1e-10) -> ProbabilityCurve:
    """Poisson average of Fock-state probabilities for a coherent input.

    Photon numbers within ``mean +- truncation sqrt(mean)`` are kept and
    the weights are renormalized; the discarded Poisson mass is stored in
    ``meta["tail_mass"]``.  Manifolds with ``n <= exact_max_n`` use the
    exact closed form or quadrature, larger ``n`` use ``sin^2(g0 sqrt(n) t)``.
    ``params.n_photons`` is ignored.

    Raises
    ------
    TruncationTooSevere
        If the discarded mass exceeds 1e-6.
    """
    if not alpha_sq > 0:
        raise ConfigError("alpha_sq must be positive")
    t = _times(np.atleast_1d(t_grid))
    n, w, tail = _poisson_window(alpha_sq, truncation)
    if tail > MAX_TAIL_MASS:
        raise TruncationTooSevere(f"discarded Poisson mass {tail:.3g} exceeds {MAX_TAIL_MASS:g}")
    w = w / math.fsum(w)
    g0 = math.sqrt(2 * params.v_g * kappa * params.gamma)
    limit = n.max() if force_exact else exact_max_n
    acc = np.zeros_like(t)
    for ni, wi in zip(n, w):
        if ni == 0:
            continue
        if ni <= limit:
            pn = params.replace(n_photons=int(ni))
            if ni == 1:
                pe = p1_closed(t, pn, kappa)
            elif ni == 2:
                pe = p2_closed(t, pn, kappa, quad_tol)
            elif ni == 3:
                pe = p_quadrature(t, pn, Lorentzian(kappa), quad_tol)
            else:
                raise ConfigError("exact manifolds are available for n <= 3 only")
        else:
            pe = np.sin(g0 * math.sqrt(ni) * t) ** 2
        acc += wi * pe
    meta = {"alpha_sq": alpha_sq, "tail_mass": tail, "n_min": int(n.min()),
            "n_max": int(n.max()), "weight_sum": float(math.fsum(w))}
    return ProbabilityCurve(t, acc, np.zeros_like(t), "coherent", meta)
