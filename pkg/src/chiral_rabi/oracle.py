"""Discrete-mode reference model.

The chiral field is put on a ring of length ``L = 2 pi / dk`` and truncated
to ``M`` momentum modes around the carrier.  The Hamiltonian conserves the
total number of excitations, so only the sector with the atom in its ground
state and N photons, plus the sector with the atom excited and N-1 photons,
is built.  Energies are measured from ``N omega_k``.

Nothing here uses the analytic amplitudes; the model exists to check them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from scipy.special import jv

from .core import Gaussian, Lorentzian, PlaneWave, ProbabilityCurve, SystemParams, validate
from .errors import (
    BandwidthMismatch,
    ConfigError,
    DimensionGuard,
    NormDrift,
    NotConverged,
    WrapTimeExceeded,
)

__all__ = [
    "DiscreteModel",
    "InitialState",
    "OracleGrid",
    "basis_dimension",
    "spectral_amplitude",
    "spectral_weight",
    "default_grid",
    "build",
    "initial_state",
    "propagate",
    "oracle_curve",
    "converged_oracle_curve",
]

MAX_DIMENSION = 6_000_000
NORM_TOL = 1e-9
EXCITATION_TOL = 1e-10
COVERAGE = 0.999


def basis_dimension(M: int, N: int) -> int:
    return math.comb(M + N - 1, N) + math.comb(M + N - 2, N - 1)


def _multisets(M, n):
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    if n == 1:
        return np.arange(M, dtype=np.int64)[:, None]
    if n == 2:
        i, j = np.triu_indices(M)
        return np.stack([i, j], axis=1).astype(np.int64)
    return np.array(list(combinations_with_replacement(range(M), n)), dtype=np.int64)


def _rank(states, M):
    """Lexicographic index of sorted multisets of size 0, 1 or 2."""
    n = states.shape[1]
    if n == 0:
        return np.zeros(states.shape[0], dtype=np.int64)
    if n == 1:
        return states[:, 0]
    a, b = states[:, 0], states[:, 1]
    return a * M - a * (a - 1) // 2 + (b - a)


def spectral_amplitude(packet, q):
    """Fourier amplitude of the single-photon envelope at ``q = k - k0``.

    ``sqrt(kappa) e^{-kappa |x|}`` transforms to
    ``sqrt(kappa / 2 pi) 2 kappa / (kappa^2 + q^2)``; the Gaussian
    ``(pi d^2)^{-1/4} e^{-x^2 / 2 d^2}`` to ``(pi d^2)^{-1/4} d e^{-q^2 d^2 / 2}``.
    """
    if isinstance(packet, Lorentzian):
        kap = packet.kappa
        return math.sqrt(kap / (2 * math.pi)) * 2 * kap / (kap * kap + q * q)
    if isinstance(packet, Gaussian):
        d = packet.d
        return (math.pi * d * d) ** -0.25 * d * np.exp(-0.5 * (q * d) ** 2)
    raise ConfigError("the oracle needs a normalizable packet")


def spectral_weight(packet, q_lo, q_hi):
    """Exact fraction of ``|spectral_amplitude|^2`` between ``q_lo`` and
    ``q_hi``."""
    if isinstance(packet, Lorentzian):
        kap = packet.kappa

        def cdf(q):
            x = q / kap
            tail = 0.0 if x == 0 or math.isinf(x) else 1 / (x + 1 / x)
            return 0.5 + (math.atan(x) + tail) / math.pi
    elif isinstance(packet, Gaussian):
        def cdf(q):
            return 0.5 * (1 + math.erf(q * packet.d))
    else:
        raise ConfigError("the oracle needs a normalizable packet")
    return cdf(q_hi) - cdf(q_lo)


@dataclass(frozen=True)
class OracleGrid:
    n_modes: int
    dk: float
    k_center: float

    @property
    def length(self) -> float:
        return 2 * math.pi / self.dk


@dataclass
class DiscreteModel:
    """Sparse Hamiltonian of the truncated ring.

    The first ``ground_dim`` basis states hold N photons with the atom in its
    ground state, the remaining ``excited_dim`` hold N-1 photons with the
    atom excited.
    """

    params: SystemParams
    packet: object
    n_modes: int
    dk: float
    k_center: float
    k_modes: np.ndarray
    coupling: float
    ground_states: np.ndarray
    excited_states: np.ndarray
    hamiltonian: sp.csr_matrix
    excitations: np.ndarray = field(repr=False)
    spectral_bounds: tuple = (0.0, 0.0)

    @property
    def ground_dim(self) -> int:
        return self.ground_states.shape[0]

    @property
    def excited_dim(self) -> int:
        return self.excited_states.shape[0]

    @property
    def dimension(self) -> int:
        return self.ground_dim + self.excited_dim

    @property
    def wrap_time(self) -> float:
        return 2 * math.pi / (self.dk * self.params.v_g)

    def hermiticity_error(self) -> float:
        diff = self.hamiltonian - self.hamiltonian.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0


@dataclass(frozen=True)
class InitialState:
    amplitudes: np.ndarray
    vector: np.ndarray
    coverage: float


def default_grid(params: SystemParams, packet, t_max: float, window_scale: float = 1.0,
                 image_margin: float = 12.0) -> OracleGrid:
    """Mode grid covering the packet and the emission line.

    The window spans ``k0 +- 40 kappa`` (``k0 +- 8/d`` for a Gaussian) joined
    with ``Omega/v_g +- 20 gamma/v_g``, scaled by ``window_scale``.  The ring
    is long enough that the periodic image of the packet sits
    ``image_margin`` widths beyond the last time of interest.
    """
    vg = params.v_g
    k0 = params.k
    if isinstance(packet, Lorentzian):
        half, width = 40 * packet.kappa, 1 / packet.kappa
    elif isinstance(packet, Gaussian):
        half, width = 8 / packet.d, packet.d
    else:
        raise ConfigError("the oracle needs a normalizable packet")
    atom = params.omega / vg
    lo = min(k0 - half * window_scale, atom - 20 * params.gamma / vg * window_scale)
    hi = max(k0 + half * window_scale, atom + 20 * params.gamma / vg * window_scale)
    L = vg * t_max * 1.02 + image_margin * width
    dk = 2 * math.pi / L
    M = max(16, int(math.ceil((hi - lo) / dk)) + 1)
    return OracleGrid(M, dk, 0.5 * (lo + hi))


def build(params: SystemParams, packet, M: int, dk: float, k_center: float | None = None,
          max_dimension: int = MAX_DIMENSION) -> DiscreteModel:
    """Assemble the number-conserving sector of the ring Hamiltonian.

    Modes sit at ``k_m = k_center + (m - (M-1)/2) dk`` and couple to the atom
    with ``g = V sqrt(dk / 2 pi)``; an N-photon state couples to the states
    with one photon fewer through ``g sqrt(n_m)``.

    Raises
    ------
    DimensionGuard
        For N > 3, M < 16 or a sector larger than ``max_dimension``.
    """
    if isinstance(packet, PlaneWave):
        raise ConfigError("the oracle needs a normalizable packet")
    validate(params, packet)
    N = params.n_photons
    if N > 3:
        raise DimensionGuard("the oracle supports N <= 3")
    if M < 16:
        raise DimensionGuard("need at least 16 modes")
    if not dk > 0:
        raise ConfigError("dk must be positive")
    dim = basis_dimension(M, N)
    if dim > max_dimension:
        raise DimensionGuard(f"sector dimension {dim} exceeds {max_dimension}")
    k_center = params.k if k_center is None else k_center
    k = k_center + (np.arange(M) - 0.5 * (M - 1)) * dk
    w = params.v_g * (k - params.k)
    g = params.coupling * math.sqrt(dk / (2 * math.pi))

    ground = _multisets(M, N)
    excited = _multisets(M, N - 1)
    ng = ground.shape[0]
    diag = np.concatenate([w[ground].sum(axis=1), w[excited].sum(axis=1) - params.delta])

    rows, cols, vals = [], [], []
    for p in range(N):
        first = np.ones(ng, dtype=bool) if p == 0 else ground[:, p] != ground[:, p - 1]
        occ = (ground == ground[:, [p]]).sum(axis=1)
        rest = np.delete(ground, p, axis=1)
        idx = np.nonzero(first)[0]
        rows.append(idx)
        cols.append(ng + _rank(rest[idx], M))
        vals.append(g * np.sqrt(occ[idx]))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    C = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim))
    H = (sp.diags(diag) + C + C.T).tocsr()
    H.sort_indices()
    # photon counts from the basis itself, plus the atomic excitation
    excitations = np.concatenate([
        np.count_nonzero(ground >= 0, axis=1),
        np.count_nonzero(excited >= 0, axis=1) + 1]).astype(float)
    # Weyl: eigenvalues of diag + offdiag lie within the diagonal range
    # widened by ||offdiag||_2 <= sqrt(||C||_1 ||C||_inf).
    Cc = C.tocsr()
    spread = math.sqrt(float(abs(Cc).sum(axis=0).max()) * float(abs(Cc).sum(axis=1).max()))
    bounds = (float(diag.min()) - spread, float(diag.max()) + spread)
    return DiscreteModel(params, packet, M, dk, k_center, k, g, ground, excited, H,
                         excitations, bounds)


def initial_state(model: DiscreteModel) -> InitialState:
    """N-photon product state ``(sum_m c_m a_m^dag)^N / sqrt(N!) |0>``.

    ``c_m`` is the spectral amplitude times ``sqrt(dk)``, renormalized on
    the grid.  ``coverage`` is the exact spectral weight inside the mode
    window ``[k_0 - dk/2, k_{M-1} + dk/2]``.

    Raises
    ------
    BandwidthMismatch
        If less than 99.9 % of the spectral weight lies on the grid.
    """
    q = model.k_modes - model.params.k
    c = spectral_amplitude(model.packet, q) * math.sqrt(model.dk)
    half = 0.5 * model.dk
    coverage = spectral_weight(model.packet, q[0] - half, q[-1] + half)
    if coverage < COVERAGE:
        raise BandwidthMismatch(f"grid captures {coverage:.5f} of the spectral weight")
    c = c / math.sqrt(float(np.sum(c * c)))
    N = model.params.n_photons
    S = model.ground_states
    amp = np.prod(c[S], axis=1)
    # sqrt(N! / prod n_m!) for each multiset
    mult = np.full(S.shape[0], float(math.factorial(N)))
    for p in range(N):
        run = np.ones(S.shape[0])
        for r in range(p):
            run += S[:, r] == S[:, p]
        mult /= run
    vec = np.zeros(model.dimension, dtype=complex)
    vec[: S.shape[0]] = np.sqrt(mult) * amp
    norm = float(np.vdot(vec, vec).real)
    if abs(norm - 1) > 1e-10:
        raise NormDrift(f"initial state norm {norm!r}")
    return InitialState(c, vec, coverage)


def _uniform(t):
    if t.size < 3:
        return True
    h = np.diff(t)
    return bool(np.all(np.abs(h - h[0]) <= 1e-12 * max(1.0, abs(t[-1]))))


def _rk4(H, psi, t_from, t_to, h_max):
    n = max(1, int(math.ceil((t_to - t_from) / h_max)))
    h = (t_to - t_from) / n
    for _ in range(n):
        k1 = -1j * (H @ psi)
        k2 = -1j * (H @ (psi + 0.5 * h * k1))
        k3 = -1j * (H @ (psi + 0.5 * h * k2))
        k4 = -1j * (H @ (psi + h * k3))
        psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


@numba.njit(cache=True, nogil=True)
def _cheb_sweep(indptr, indices, data, shift, T1, T0, acc, coef):
    # T0 <- 2 (data - shift) T1 - T0 and acc += coef * T0, in one pass
    for i in range(T1.size):
        s = -shift * T1[i]
        for j in range(indptr[i], indptr[i + 1]):
            s += data[j] * T1[indices[j]]
        v = 2.0 * s - T0[i]
        T0[i] = v
        acc[i] += coef * v


@numba.njit(cache=True, nogil=True)
def _cheb_first(indptr, indices, data, shift, T0, T1):
    for i in range(T0.size):
        s = -shift * T0[i]
        for j in range(indptr[i], indptr[i + 1]):
            s += data[j] * T0[indices[j]]
        T1[i] = s


def _cheb_setup(bounds, x_max, tol):
    lo, hi = bounds
    a = 0.5 * (hi - lo) * (1 + 1e-9) + 1e-12
    b = 0.5 * (hi + lo)
    x = a * x_max
    K = int(x + 12 * max(x, 1.0) ** (1 / 3) + 25)
    while abs(jv(K, x)) > tol * 1e-3:
        K = int(K * 1.3) + 10
    J = jv(np.arange(K + 1), x)
    n = min(int(np.nonzero(np.abs(J) > tol)[0].max()) + 2, K + 1)
    return a, b, n


def _chebyshev(H, psi, dt, bounds, tol=1e-15):
    """``exp(-i H dt) psi`` by a Chebyshev expansion over the spectral bounds.

    ``H`` must be real symmetric CSR.  The coefficients are Bessel values
    ``J_k(a dt)``; the series is cut once they fall below ``tol``.
    """
    state, _ = _chebyshev_multi(H, psi, np.array([dt]), bounds, psi.size, tol)
    return state


def _chebyshev_multi(H, psi, times, bounds, split, tol=1e-15):
    """One Chebyshev expansion serving every time in ``times``.

    Returns the full state at ``times[-1]`` and the components
    ``psi[split:]`` at each time.  The series length is set by the largest
    time, where the truncation error is largest, so every earlier time is
    at least as accurate.
    """
    times = np.asarray(times, dtype=float)
    a, b, n = _cheb_setup(bounds, times[-1], tol)
    J = jv(np.arange(n)[None, :], a * times[:, None])
    phase = (-1j) ** np.arange(n)
    coef = 2 * phase[None, :] * J
    coef[:, 0] = J[:, 0]

    data = H.data / a
    shift = b / a
    T0 = np.array(psi, dtype=complex)
    T1 = np.empty_like(T0)
    _cheb_first(H.indptr, H.indices, data, shift, T0, T1)
    acc = coef[-1, 0] * T0 + coef[-1, 1] * T1
    part = coef[:, :1] * T0[None, split:] + coef[:, 1:2] * T1[None, split:]
    for k in range(2, n):
        # after the sweep T0 holds T_k; swap so T1 is the newest
        _cheb_sweep(H.indptr, H.indices, data, shift, T1, T0, acc, coef[-1, k])
        T0, T1 = T1, T0
        part += coef[:, k:k + 1] * T1[None, split:]
    rot = np.exp(-1j * b * times)
    return rot[-1] * acc, rot[:, None] * part


def propagate(model: DiscreteModel, initial: InitialState, t_grid, step_tol: float = 0.1,
              method: str = "chebyshev") -> ProbabilityCurve:
    """Excited-state population along ``t_grid``.

    ``method="chebyshev"`` expands the exact propagator in Chebyshev
    polynomials over rigorous spectral bounds, truncated once the Bessel
    coefficients at the last time drop below 1e-15.  One expansion serves
    the whole grid; norm and excitation number are checked on the final
    state, whose truncation error bounds that of every earlier time.
    The other methods check every grid point.  ``method="expm"`` uses
    scipy's truncated Taylor action of the matrix exponential.
    ``method="rk4"`` takes fixed classical Runge-Kutta steps with
    ``h ||H||_1 <= step_tol``; its norm drift is typically too large for
    the 1e-9 check and it is kept for comparison.

    Raises
    ------
    WrapTimeExceeded
        If the grid reaches the ring's round-trip time.
    NormDrift
        If the norm moves by more than 1e-9.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ConfigError("t_grid must be non-negative and strictly increasing")
    if t[-1] >= model.wrap_time:
        raise WrapTimeExceeded(f"t_max={t[-1]:g} reaches the wrap time {model.wrap_time:g}")
    H = model.hamiltonian
    A = (-1j * H).tocsc()
    psi = initial.vector
    states = []
    if method == "expm":
        if t[0] > 0:
            psi = expm_multiply(A * t[0], psi)
        if t.size > 1 and _uniform(t):
            out = expm_multiply(A, psi, start=0.0, stop=t[-1] - t[0], num=t.size, endpoint=True)
            states = list(out)
        else:
            states.append(psi)
            for a, b in zip(t[:-1], t[1:]):
                psi = expm_multiply(A * (b - a), psi)
                states.append(psi)
    elif method == "chebyshev":
        ng = model.ground_dim
        pos = t[t > 0]
        if pos.size:
            final, parts = _chebyshev_multi(H, psi, pos, model.spectral_bounds, ng)
            pops = np.concatenate([np.zeros(t.size - pos.size),
                                   np.sum(np.abs(parts) ** 2, axis=1)])
        else:
            final, pops = psi, np.zeros(t.size)
        return _finish(model, initial, t, pops, [psi, final], method)
    elif method == "rk4":
        h_max = step_tol / max(float(abs(H).sum(axis=0).max()), 1e-300)
        prev = 0.0
        for tt in t:
            if tt > prev:
                psi = _rk4(H, psi, prev, tt, h_max)
            prev = tt
            states.append(psi)
    else:
        raise ConfigError(f"unknown propagation method {method!r}")

    ng = model.ground_dim
    pops = np.array([float(np.sum(np.abs(v[ng:]) ** 2)) for v in states])
    return _finish(model, initial, t, pops, states, method)


def _finish(model, initial, t, pops, checked, method):
    N = model.params.n_photons
    norms, excs = [], []
    for v in checked:
        prob = (v.conj() * v).real
        norms.append(prob.sum())
        excs.append(prob @ model.excitations)
    norms = np.array(norms)
    excs = np.array(excs)
    norm_drift = float(np.max(np.abs(norms - 1)))
    exc_drift = float(np.max(np.abs(excs / norms - N)))
    meta = {
        "n_modes": model.n_modes, "dk": model.dk, "dimension": model.dimension,
        "norm_drift": norm_drift, "excitation_drift": exc_drift,
        "coverage": initial.coverage, "method": method,
    }
    if norm_drift > NORM_TOL:
        raise NormDrift(f"norm drift {norm_drift:.3g} exceeds {NORM_TOL:g}")
    if exc_drift > EXCITATION_TOL:
        raise NormDrift(f"excitation number drift {exc_drift:.3g} exceeds {EXCITATION_TOL:g}")
    return ProbabilityCurve(t, np.clip(pops, 0.0, None), np.zeros_like(pops), "oracle", meta)


def oracle_curve(params: SystemParams, packet, t_grid, window_scale: float = 1.0,
                 image_margin: float = 12.0, refine: int = 0, method: str = "chebyshev",
                 max_dimension: int = MAX_DIMENSION) -> ProbabilityCurve:
    """Build the default grid, refine it ``refine`` times (halving ``dk`` and
    doubling ``M``) and propagate."""
    t = np.asarray(t_grid, dtype=float)
    grid = default_grid(params, packet, float(t[-1]), window_scale, image_margin)
    M, dk = grid.n_modes, grid.dk
    for _ in range(refine):
        M, dk = 2 * M, dk / 2
    model = build(params, packet, M, dk, grid.k_center, max_dimension)
    curve = propagate(model, initial_state(model), t, method=method)
    return curve


def converged_oracle_curve(params: SystemParams, packet, t_grid, tol: float = 3e-4,
                           window_scale: float = 1.0, image_margin: float = 12.0,
                           window_tol: float | None = None, max_refine: int = 2,
                           max_dimension: int = MAX_DIMENSION) -> ProbabilityCurve:
    """Oracle curve refined until halving ``dk`` and doubling ``M`` moves it by
    less than ``tol`` everywhere.

    With ``window_tol`` set, the momentum window is also doubled once and
    the change must stay below ``window_tol``.  The finest curve is
    returned; its ``meta`` records each change and the worst norm and
    excitation drift seen.

    Raises
    ------
    NotConverged
    """
    def run(ws, refine):
        return oracle_curve(params, packet, t_grid, ws, image_margin, refine,
                            max_dimension=max_dimension)

    history = []
    prev = run(window_scale, 0)
    drifts = [prev.meta["norm_drift"]]
    excs = [prev.meta["excitation_drift"]]
    ok = False
    best = prev
    for r in range(1, max_refine + 1):
        cur = run(window_scale, r)
        drifts.append(cur.meta["norm_drift"])
        excs.append(cur.meta["excitation_drift"])
        change = float(np.max(np.abs(cur.values - prev.values)))
        history.append(change)
        best, prev = cur, cur
        if change < tol:
            ok = True
            break
    if not ok:
        raise NotConverged(f"oracle changed by {history[-1]:.3g} > {tol:g} after refinement")
    meta = dict(best.meta)
    meta["refine_changes"] = history
    if window_tol is not None:
        wide = oracle_curve(params, packet, t_grid, 2 * window_scale, image_margin,
                            len(history), max_dimension=max_dimension)
        drifts.append(wide.meta["norm_drift"])
        excs.append(wide.meta["excitation_drift"])
        wchange = float(np.max(np.abs(wide.values - best.values)))
        meta["window_change"] = wchange
        if wchange >= window_tol:
            raise NotConverged(f"window doubling changed the oracle by {wchange:.3g}")
        best = wide
        meta.update({k: wide.meta[k] for k in ("n_modes", "dk", "dimension", "coverage")})
    meta["max_norm_drift"] = float(max(drifts))
    meta["max_excitation_drift"] = float(max(excs))
    return ProbabilityCurve(best.times, best.values, best.std_errors, "oracle", meta)
