import math

import numpy as np
import pytest
from scipy.integrate import quad

from chiral_rabi import Gaussian, Lorentzian, PhotonConfiguration, PlaneWave, SystemParams
from chiral_rabi.errors import ConfigError, EnumerationCapExceeded
from chiral_rabi.special import PhiKernel, phi
from chiral_rabi.wavefunction import (
    bracket_input,
    evaluate,
    evaluate_gaussian,
    evaluate_lorentzian,
    evaluate_plane,
    lorentzian_prefactor,
    order_decomposition,
    plane_prefactor,
    product_packet_amplitude,
)
from chiral_rabi.combinatorics import bracket_fast


def cquad(f, a, b):
    re = quad(lambda s: f(s).real, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    im = quad(lambda s: f(s).imag, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    return complex(re, im)


PACKETS = [PlaneWave(), Lorentzian(0.3), Gaussian(1.2)]


@pytest.mark.parametrize("packet", PACKETS, ids=lambda p: p.name)
def test_zero_at_t0(packet):
    p = SystemParams.from_detuning(0.5, n_photons=3)
    assert evaluate(PhotonConfiguration((0.3, -1.0), 0.0), p, packet) == 0


def test_prefactor_modulus_identity():
    for N in (1, 2, 5):
        for kappa in (0.05, 0.4, 0.85):
            for delta in (0.0, -1.3, 4.0):
                p = SystemParams.from_detuning(delta, n_photons=N)
                A = lorentzian_prefactor(p, kappa)
                expected = 2 * N * kappa**N / (delta**2 + (1 - kappa) ** 2)
                assert A.abs2 == pytest.approx(expected, rel=1e-14)


def test_plane_single_photon():
    p = SystemParams.from_detuning(0.6)
    t = 1.4
    e = evaluate_plane(PhotonConfiguration((), t), p)
    expected = plane_prefactor(p).abs2 * abs(phi(PhiKernel(0.6, 1.0), t)) ** 2
    assert abs(e) ** 2 == pytest.approx(expected, rel=1e-14)


def test_plane_all_negative():
    p = SystemParams(omega=0.5, omega_k=1.2, n_photons=3)
    x, t = np.array([-0.4, -2.0]), 1.1
    e = evaluate_plane(PhotonConfiguration(tuple(x), t), p)
    phase = np.prod(np.exp(1j * (p.k * x - p.omega_k * t)))
    expected = plane_prefactor(p).value * np.exp(-1j * p.delta * t) * phase * phi(
        PhiKernel(p.delta, 1.0), t)
    assert e == pytest.approx(expected, rel=1e-14)


def test_lorentzian_negative_coordinate():
    kappa, t, x = 0.3, 2.0, -0.7
    p = SystemParams.from_detuning(0.4, n_photons=2)
    e = evaluate_lorentzian(PhotonConfiguration((x,), t), p, Lorentzian(kappa))
    expected = (lorentzian_prefactor(p, kappa).abs2 * math.exp(-2 * kappa * t)
                * math.exp(-2 * kappa * abs(x - t)) * abs(phi(PhiKernel(0.4, 1 - kappa), t)) ** 2)
    assert abs(e) ** 2 == pytest.approx(expected, rel=1e-13)


def test_lorentzian_narrow_limit_bracket():
    p = SystemParams.from_detuning(0.4, n_photons=3)
    cfg = PhotonConfiguration((0.5, 1.7), 2.5)
    narrow = bracket_fast(bracket_input(cfg, p, Lorentzian(1e-8))).value
    plane = bracket_fast(bracket_input(cfg, p, PlaneWave())).value
    assert narrow == pytest.approx(plane, rel=1e-7)


def test_gaussian_wide_limit_matches_plane_structure():
    d = 1e4
    p = SystemParams(omega=0.2, omega_k=0.9, n_photons=2)
    cfg = PhotonConfiguration((0.8,), 1.9)
    g = evaluate_gaussian(cfg, p, Gaussian(d))
    plane = evaluate_plane(cfg, p)
    nd = (math.pi * d * d) ** -0.25
    assert g == pytest.approx(plane * (2 * math.pi) * nd**2, rel=1e-6)


def test_gaussian_cap():
    p = SystemParams(n_photons=12)
    with pytest.raises(EnumerationCapExceeded):
        evaluate_gaussian(PhotonConfiguration(tuple(np.linspace(0.1, 1, 11)), 2.0), p, Gaussian(1.0))


@pytest.mark.parametrize("packet", PACKETS, ids=lambda p: p.name)
def test_decomposition_sums_to_amplitude(packet):
    p = SystemParams.from_detuning(0.3, n_photons=4)
    cfg = PhotonConfiguration((0.2, 1.1, -0.5), 2.0)
    K = order_decomposition(cfg, p, packet)
    e = evaluate(cfg, p, packet)
    assert len(K) == 4
    assert np.sum(K) == pytest.approx(e, rel=1e-12)
    assert K[3] == 0


def test_four_orders_resonant():
    p = SystemParams(n_photons=4)
    cfg = PhotonConfiguration((0.4, 1.0, 1.7), 2.5)
    for packet in (PlaneWave(), Lorentzian(0.2)):
        K = order_decomposition(cfg, p, packet)
        assert np.all(np.abs(K) > 0)


@pytest.mark.parametrize("packet", PACKETS, ids=lambda p: p.name)
def test_bosonic_symmetry(packet):
    p = SystemParams.from_detuning(-0.7, n_photons=4)
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 3, 3)
    a = evaluate(PhotonConfiguration(tuple(x), 2.5), p, packet)
    for perm in ([1, 0, 2], [2, 1, 0], [1, 2, 0]):
        b = evaluate(PhotonConfiguration(tuple(x[perm]), 2.5), p, packet)
        assert b == pytest.approx(a, rel=1e-12)


@pytest.mark.parametrize("packet", PACKETS, ids=lambda p: p.name)
def test_gauge_shift(packet):
    base = SystemParams(omega=0.1, omega_k=0.6, n_photons=3)
    shifted = base.replace(omega=3.1, omega_k=3.6)
    cfg = PhotonConfiguration((0.3, 1.4), 2.0)
    assert abs(evaluate(cfg, shifted, packet)) == pytest.approx(abs(evaluate(cfg, base, packet)),
                                                                rel=1e-10)


@pytest.mark.parametrize("packet", PACKETS, ids=lambda p: p.name)
def test_stitching_across_origin(packet):
    p = SystemParams.from_detuning(0.5, n_photons=3)
    t, eps = 2.0, 1e-9
    below = PhotonConfiguration((-eps, 1.2), t)
    above = PhotonConfiguration((eps, 1.2), t)
    Kb = order_decomposition(below, p, packet)
    Ka = order_decomposition(above, p, packet)
    # one more photon has crossed, so exactly one new order opens up
    assert Kb[2] == 0 and Ka[2] != 0
    jump = np.sum(Ka) - np.sum(Kb)
    # each lower order moves by O(eps); the new order is itself O(eps)
    scale = abs(np.sum(Kb))
    assert abs(jump - (Ka[2] + (Ka[1] - Kb[1]) + (Ka[0] - Kb[0]))) <= 1e-12 * scale
    assert abs(jump) <= 1e-7 * scale
    assert abs(Ka[2]) <= 1e-7 * scale


def _lorentzian_pieces(p, kappa, t):
    k, vg, Om = p.k, p.v_g, p.omega
    Omt = Om - 1j * p.gamma

    def u(y):
        return np.sqrt(kappa) * np.exp(-kappa * np.abs(y) + 1j * k * y)

    def seg(a, b):
        return cquad(lambda tau: np.exp(-1j * Omt * tau) * u(a - vg * t + vg * tau), 0, (b - a) / vg)

    def tail(s):
        return np.exp(1j * Om * s) * cquad(lambda tau: np.exp(-1j * Omt * tau) * u(vg * (tau - s)),
                                           0, s)
    return u, seg, tail


@pytest.mark.parametrize("N,coords,t,delta,kappa", [
    (2, [0.7], 2.0, 0.3, 0.4),
    (3, [0.5, 1.4], 2.2, -0.6, 0.3),
    (3, [1.4, -0.3], 2.0, 0.0, 0.85),
    (4, [0.3, 1.1, 1.6], 2.5, 0.8, 0.2),
])
def test_generic_product_packet_reproduces_lorentzian(N, coords, t, delta, kappa):
    p = SystemParams(gamma=1.0, omega=1.3, omega_k=1.3 + delta, n_photons=N)
    u, seg, tail = _lorentzian_pieces(p, kappa, t)
    generic = product_packet_amplitude(coords, t, p, u, seg, tail)
    closed = order_decomposition(PhotonConfiguration(tuple(coords), t), p, Lorentzian(kappa))
    np.testing.assert_allclose(generic, closed, rtol=1e-8, atol=1e-12)


def test_bracket_input_rejects_gaussian():
    with pytest.raises(ConfigError):
        bracket_input(PhotonConfiguration((0.1,), 1.0), SystemParams(n_photons=2), Gaussian(1.0))
