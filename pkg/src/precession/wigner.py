"""Spherical spin-Wigner functions from a multipole expansion.

The density matrix is expanded in orthonormal spherical tensor operators

    T_kq = sum_{m, m'} (-1)^(J - m') <J m; J -m' | k q> |m><m'|,

and W(theta, phi) = sqrt(2/pi) sum_kq rho_kq Y_kq(theta, phi) with
rho_kq = Tr(T_kq^dagger rho).  The absolute scale is a convention; only
scale-free properties are meaningful.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, pi, sqrt

import numpy as np

from .errors import DegenerateTruncation, NumericalInconsistency
from .pulses import subspace_range
from .spin import QuditState, SpinSystem, spin_operators

PREFACTOR = sqrt(2 / pi)
IMAG_TOL = 1e-8


def _half(x) -> Fraction:
    return Fraction(x).limit_denominator(2)


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """<j1 m1; j2 m2 | j m> with the Condon-Shortley phase (exact Racah sum)."""
    j1, m1, j2, m2, j, m = map(_half, (j1, m1, j2, m2, j, m))
    if m1 + m2 != m or not abs(j1 - j2) <= j <= j1 + j2:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(m) > j:
        return 0.0
    for a, b in ((j1, m1), (j2, m2), (j, m)):
        if (a - b).denominator != 1:
            return 0.0
    if (j1 + j2 + j).denominator != 1:
        return 0.0
    f = lambda x: factorial(int(x))  # noqa: E731
    pref = Fraction((2 * j + 1) * f(j + j1 - j2) * f(j - j1 + j2) * f(j1 + j2 - j), f(j1 + j2 + j + 1))
    pref *= f(j + m) * f(j - m) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2)
    lo = int(max(0, j2 - j - m1, j1 - j + m2))
    hi = int(min(j1 + j2 - j, j1 - m1, j2 + m2))
    total = Fraction(0)
    for k in range(lo, hi + 1):
        den = f(k) * f(j1 + j2 - j - k) * f(j1 - m1 - k) * f(j2 + m2 - k) * f(j - j2 + m1 + k) * f(j - j1 - m2 + k)
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0.0
    return float(np.sign(float(total))) * sqrt(pref * total * total)


def spherical_harmonic(l: int, m: int, theta, phi):
    """Y_lm(theta, phi) with Condon-Shortley phase; theta polar, phi azimuth.

    Associated Legendre functions come from the stable upward recursion in
    degree starting at P_|m|^|m|.
    """
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    if abs(m) > l:
        return np.zeros(theta.shape, complex)
    am = abs(m)
    x = np.cos(theta)
    s = np.sin(theta)
    p_mm = (-1) ** am * np.prod(np.arange(1, 2 * am, 2, dtype=float)) * s ** am
    if l == am:
        p = p_mm
    else:
        p_prev, p = p_mm, x * (2 * am + 1) * p_mm
        for ll in range(am + 2, l + 1):
            p_prev, p = p, ((2 * ll - 1) * x * p - (ll + am - 1) * p_prev) / (ll - am)
    norm = sqrt((2 * l + 1) / (4 * pi) * factorial(l - am) / factorial(l + am))
    y = norm * p * np.exp(1j * am * phi)
    if m < 0:
        y = (-1) ** am * np.conj(y)
    return y


@lru_cache(maxsize=None)
def _tensors(two_j: int) -> np.ndarray:
    J = Fraction(two_j, 2)
    d = two_j + 1
    ms = [J - i for i in range(d)][::-1]  # ascending
    T = np.zeros((d, 2 * d - 1, d, d))
    for k in range(d):
        for q in range(-k, k + 1):
            for a, m in enumerate(ms):
                for b, mp in enumerate(ms):
                    if m - mp != q:
                        continue
                    T[k, q + d - 1, a, b] = (-1) ** int(J - mp) * clebsch_gordan(J, m, J, -mp, k, q)
    flat = T.reshape(-1, d * d)
    gram = flat @ flat.T
    used = np.array([abs(q) <= k for k in range(d) for q in range(-(d - 1), d)])
    if not np.allclose(gram[np.ix_(used, used)], np.eye(used.sum()), atol=1e-12):
        raise NumericalInconsistency("spherical tensor operators are not orthonormal")
    T.setflags(write=False)
    return T


def spherical_tensors(system: SpinSystem) -> np.ndarray:
    """Real array T[k, q + 2J, :, :] of orthonormal tensor operators (zero for |q| > k)."""
    return _tensors(system.two_j)


@dataclass(frozen=True)
class MultipoleDecomposition:
    system: SpinSystem
    coefficients: np.ndarray  # [k, q + 2J]

    def coefficient(self, k: int, q: int) -> complex:
        if abs(q) > k:
            return 0j
        return complex(self.coefficients[k, q + self.system.d - 1])

    def reconstruct(self) -> np.ndarray:
        return np.einsum("kq,kqab->ab", self.coefficients, spherical_tensors(self.system))

    def hermiticity_error(self) -> float:
        d = self.system.d
        err = 0.0
        for k in range(d):
            for q in range(-k, k + 1):
                err = max(err, abs(self.coefficient(k, -q) - (-1) ** q * np.conj(self.coefficient(k, q))))
        return err


def multipole_decompose(state: QuditState) -> MultipoleDecomposition:
    rho = state.density()
    T = spherical_tensors(state.system)
    # T is real, so T^dagger = T^T
    coeffs = np.einsum("kqab,ab->kq", T, rho)
    return MultipoleDecomposition(state.system, coeffs)


def _harmonics(d: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    Y = np.zeros((d, 2 * d - 1) + theta.shape, complex)
    for k in range(d):
        for q in range(-k, k + 1):
            Y[k, q + d - 1] = spherical_harmonic(k, q, theta, phi)
    return Y


def wigner_value(state: QuditState, theta, phi, decomposition: MultipoleDecomposition | None = None):
    """Spin-Wigner function at polar angle ``theta`` and azimuth ``phi``.

    Accepts scalars or broadcastable arrays.

    Raises
    ------
    NumericalInconsistency
        If the imaginary residue exceeds 1e-8.
    """
    dec = multipole_decompose(state) if decomposition is None else decomposition
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    Y = _harmonics(state.d, theta, phi)
    W = PREFACTOR * np.tensordot(dec.coefficients, Y, axes=([0, 1], [0, 1]))
    resid = float(np.max(np.abs(W.imag))) if W.size else 0.0
    if resid > IMAG_TOL:
        raise NumericalInconsistency(f"Wigner function has imaginary residue {resid:.2e}")
    W = W.real
    return float(W) if W.ndim == 0 else W


def wigner_grid(state: QuditState, n_theta: int = 100, n_phi: int = 200):
    """W on a regular grid: theta in [0, pi] inclusive, phi in [0, 2 pi)."""
    th = np.linspace(0, np.pi, n_theta)
    ph = np.linspace(0, 2 * np.pi, n_phi, endpoint=False)
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    return th, ph, wigner_value(state, TH, PH)


def equatorial_profile(state: QuditState, n_phi: int = 720):
    ph = np.linspace(0, 2 * np.pi, n_phi, endpoint=False)
    return ph, wigner_value(state, np.full_like(ph, np.pi / 2), ph)


def truncate_density(state: QuditState, subspace) -> QuditState:
    """Block of the density matrix on ``subspace``, renormalised to unit trace.

    The result is meant for visualising a subspace protocol only; it drops
    coherences and population outside the block.

    Raises
    ------
    DegenerateTruncation
        If the subspace population is below 1e-12.
    """
    lo, hi = subspace_range(state.system, subspace)
    rho = state.density()[lo:hi + 1, lo:hi + 1]
    weight = float(np.trace(rho).real)
    if weight < 1e-12:
        raise DegenerateTruncation(f"subspace {lo}..{hi} holds population {weight:.2e}")
    return QuditState(spin_operators((hi - lo) / 2), rho / weight)
