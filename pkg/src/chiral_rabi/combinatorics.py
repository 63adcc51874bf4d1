"""The ordered-chain sum ("bracket") shared by all excited-state amplitudes.

For photon positions ``x_1 .. x_{N-1}`` and time ``t`` the bracket is

    phi(t) + sum_j c^j sum_{chains} phi(t - y_last / v_g)
             * prod_m phi((y_m - y_{m-1}) / v_g)

where a chain is an ordered tuple of distinct photons.  Heaviside factors
restrict the sum to increasing chains ``0 < y_0 < ... < y_last < v_g t``, so
after sorting the positive coordinates it collapses to a recursion over
chain endpoints.

``c`` is the per-absorption weight, written ``1 - t_k`` in terms of an
effective transmission ``t_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numba
import numpy as np

from .errors import ConfigError, EnumerationCapExceeded
from .special import PhiKernel

__all__ = [
    "BracketInput",
    "OrderDecomposition",
    "BracketValue",
    "count_permutations",
    "bracket_reference",
    "bracket_fast",
    "bracket_abs2_batch",
    "ENUMERATION_CAP",
]

ENUMERATION_CAP = 10


@dataclass(frozen=True)
class BracketInput:
    """Arguments of one bracket evaluation.

    Parameters
    ----------
    coords : sequence of float
        Positions of the N-1 photons.
    t : float
        Evaluation time.
    kernel : PhiKernel
    t_k : complex
        Effective transmission; each absorption contributes ``1 - t_k``.
    v_g : float
    """

    coords: tuple
    t: float
    kernel: PhiKernel
    t_k: complex
    v_g: float = 1.0

    def __post_init__(self):
        coords = tuple(float(x) for x in np.atleast_1d(np.asarray(self.coords, dtype=float)))
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "t_k", complex(self.t_k))
        if not (all(map(math.isfinite, coords)) and math.isfinite(self.t)
                and math.isfinite(abs(self.t_k))):
            raise ConfigError("bracket inputs must be finite")
        if not self.v_g > 0:
            raise ConfigError("v_g must be positive")

    @property
    def weight(self) -> complex:
        return 1.0 - self.t_k


@dataclass(frozen=True)
class OrderDecomposition:
    """Bracket split by scattering order; ``terms[l]`` carries ``c**l``."""

    terms: np.ndarray

    def total(self) -> complex:
        return complex(np.sum(self.terms))

    def __len__(self):
        return len(self.terms)

    def __getitem__(self, l):
        return self.terms[l]


@dataclass(frozen=True)
class BracketValue:
    value: complex
    decomposition: OrderDecomposition

    def __iter__(self):
        yield self.value
        yield self.decomposition


def count_permutations(n_photons: int, order: int) -> int:
    """Number of ordered ``order``-tuples drawn from ``n_photons - 1`` photons."""
    if n_photons < 1 or not 0 <= order <= n_photons - 1:
        raise ConfigError(f"need 0 <= order <= N-1, got N={n_photons}, order={order}")
    return math.perm(n_photons - 1, order)


def _theta(x: float) -> float:
    return 1.0 if x >= 0 else 0.0


def bracket_reference(inp: BracketInput, cap: int = ENUMERATION_CAP) -> BracketValue:
    """Enumerate every ordered tuple and apply the step functions literally.

    Serves as ground truth for :func:`bracket_fast`.  Cost grows like
    ``(N-1)!``; inputs with more than ``cap`` coordinates are refused.
    """
    x = inp.coords
    n = len(x)
    if n > cap:
        raise EnumerationCapExceeded(f"{n} coordinates exceed the enumeration cap {cap}")
    f = inp.kernel
    vg, t, c = inp.v_g, inp.t, inp.weight
    terms = np.zeros(n + 1, dtype=complex)
    terms[0] = f(t) * _theta(t)
    for j in range(1, n + 1):
        acc = 0j
        for lam in permutations(range(n), j):
            # Step functions on each increment x^(m) and on each retarded
            # time t^(m) = t - x_{lambda_{m-1}} / v_g, including the
            # intermediate ones.
            steps = _theta(x[lam[0]])
            for m in range(1, j):
                steps *= _theta(x[lam[m]] - x[lam[m - 1]]) * _theta(t - x[lam[m - 1]] / vg)
            t_j = t - x[lam[-1]] / vg
            steps *= _theta(t_j)
            if steps == 0.0:
                continue
            term = f(x[lam[0]] / vg)
            for m in range(1, j):
                term *= f((x[lam[m]] - x[lam[m - 1]]) / vg)
            acc += term * f(t_j)
        terms[j] = c**j * acc
    return BracketValue(complex(np.sum(terms)), OrderDecomposition(terms))


def _active(coords, t, v_g):
    """Sorted coordinates that can sit on a chain, ``0 <= y <= v_g t``."""
    y = np.sort(np.asarray(coords, dtype=float))
    return y[(y >= 0.0) & (y <= v_g * t)]


def bracket_fast(inp: BracketInput) -> BracketValue:
    """Chain recursion over the sorted active coordinates.

    With ``G(i) = c [phi(y_i) + sum_{l<i} G(l) phi(y_i - y_l)]`` the bracket
    is ``phi(t) + sum_i G(i) phi(t - y_i)``.  The inner sums are carried
    forward with ``phi(a + b) = e^{r a} phi(b) + phi(a)`` so the value costs
    O(n).  The order split keeps one such running sum per chain length,
    which costs O(n^2).
    """
    f = inp.kernel
    vg, t, c = inp.v_g, inp.t, inp.weight
    y = _active(inp.coords, t, vg) / vg
    n_total = len(inp.coords)
    terms = np.zeros(n_total + 1, dtype=complex)
    terms[0] = f(t)
    n = y.size
    if n == 0:
        return BracketValue(complex(terms[0]), OrderDecomposition(terms))

    # Points at which the running sums are needed: every y_i, then t.
    nodes = np.append(y, t)
    steps = np.diff(nodes, prepend=0.0)
    grow = np.exp(f.rate * steps)
    jump = f(steps)

    value = _chain_value(grow, jump, c)
    # order split: D[j] = sum over chains of length j+1 ending before the
    # current node of prod(phi) * phi(node - end); S[j] the same without
    # the trailing phi.
    D = np.zeros(n, dtype=complex)
    S = np.zeros(n, dtype=complex)
    first = 0j  # phi(node) measured from the origin
    for i in range(n + 1):
        first = grow[i] * first + jump[i]
        D = grow[i] * D + jump[i] * S
        if i == n:
            break
        G = np.empty(n, dtype=complex)
        G[0] = first
        G[1:] = D[:-1]
        S = S + G
    powers = c ** np.arange(1, n + 1)
    terms[1:n + 1] = powers * D
    return BracketValue(complex(terms[0] + value), OrderDecomposition(terms))


def _chain_value(grow, jump, c):
    """Sum over all chains, weights folded in; returns bracket - phi(t)."""
    first = 0j
    D = 0j
    S = 0j
    n = grow.size - 1
    for i in range(n + 1):
        first = grow[i] * first + jump[i]
        D = grow[i] * D + jump[i] * S
        if i == n:
            break
        S += c * (first + D)
    return D


@numba.njit(cache=True, nogil=True)
def _cexpm1(z):
    # exp(z) - 1 without cancellation for small |z|
    x = z.real
    y = z.imag
    s = math.sin(0.5 * y)
    re = math.expm1(x) * math.cos(y) - 2.0 * s * s
    im = math.exp(x) * math.sin(y)
    return complex(re, im)


@numba.njit(cache=True, nogil=True)
def _bracket_one(y, t, rate, c):
    # y sorted, already scaled by 1/v_g and restricted to [0, t]
    first = 0j
    D = 0j
    S = 0j
    prev = 0.0
    n = y.size
    for i in range(n + 1):
        node = y[i] if i < n else t
        jmp = _cexpm1(rate * (node - prev))
        g = jmp + 1.0
        prev = node
        first = g * first + jmp
        D = g * D + jmp * S
        if i < n:
            S += c * (first + D)
    return _cexpm1(rate * t) + D


@numba.njit(cache=True, nogil=True)
def bracket_abs2_batch(coords, t, rate, c, v_g):
    """``|bracket|^2`` for each row of ``coords``.

    Parameters
    ----------
    coords : ndarray, shape (S, n)
    t : float
    rate : complex
        ``i delta - gamma_eff``.
    c : complex
        Per-absorption weight.
    v_g : float
    """
    S, n = coords.shape
    out = np.empty(S)
    buf = np.empty(n)
    for s in range(S):
        m = 0
        for j in range(n):
            u = coords[s, j] / v_g
            if u >= 0.0 and u <= t:
                buf[m] = u
                m += 1
        y = np.sort(buf[:m])
        b = _bracket_one(y, t, rate, c)
        out[s] = b.real * b.real + b.imag * b.imag
    return out
