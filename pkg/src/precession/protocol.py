"""Classical and quantum precession scores.

A precession protocol samples the positivity of the x-component of a
uniformly precessing spin at K angles and averages the outcomes.  The
classical average can never exceed (1 + 1/K)/2 for admissible angle sets;
quantum states of spins with d > K can.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, floor

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InvalidArgument, UnsupportedDimension, UnsupportedRegime
from .spin import (
    QuditState,
    SpinSystem,
    cat_state,
    pos_operator,
    rz,
    top_eigen,
)

TWO_PI = 2 * np.pi


def _check_K(K) -> int:
    if int(K) != K or K < 3 or K % 2 == 0:
        raise InvalidArgument(f"K must be an odd integer >= 3, got {K}")
    return int(K)


@dataclass(frozen=True, eq=False)
class AngleSet:
    """Sorted probing angles phi_1 <= ... <= phi_K spanning at most 2 pi."""

    angles: np.ndarray
    uniform: bool = False
    offset: float = 0.0

    def __post_init__(self):
        a = np.sort(np.asarray(self.angles, dtype=float))
        _check_K(len(a))
        if a[-1] - a[0] > TWO_PI + 1e-12:
            raise InvalidArgument("angle set spans more than 2 pi")
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)

    @classmethod
    def uniform_set(cls, K: int, offset: float = 0.0) -> "AngleSet":
        K = _check_K(K)
        return cls(offset + TWO_PI * np.arange(K) / K, uniform=True, offset=offset)

    @classmethod
    def from_angles(cls, angles) -> "AngleSet":
        a = np.sort(np.asarray(angles, dtype=float))
        K = _check_K(len(a))
        uniform = np.allclose(a - a[0], TWO_PI * np.arange(K) / K, atol=1e-12)
        return cls(a, uniform=bool(uniform), offset=float(a[0]) if uniform else 0.0)

    @property
    def K(self) -> int:
        return len(self.angles)

    def shifted(self, delta: float) -> "AngleSet":
        return AngleSet(self.angles + delta, self.uniform, self.offset + delta)


# --------------------------------------------------------------------------
# classical protocol


def classical_bound(K: int) -> Fraction:
    """(1 + 1/K)/2 as an exact fraction."""
    K = _check_K(K)
    return (1 + Fraction(1, K)) / 2


def classical_score(phi0: float, angles: AngleSet) -> Fraction:
    """Fraction of probing angles at which cos(phi0 + phi_k) >= 0."""
    hits = int(np.count_nonzero(np.cos(phi0 + angles.angles) >= 0))
    return Fraction(hits, angles.K)


def check_angle_condition(angles: AngleSet) -> bool:
    """True when every half-way partner lies at most pi further round the circle.

    For sorted angles this is the condition under which the classical
    bound (1 + 1/K)/2 holds.
    """
    a = angles.angles
    K = angles.K
    partner = a[(np.arange(K) + (K - 1) // 2) % K]
    gaps = np.mod(partner - a, TWO_PI)
    return bool(np.all(gaps <= np.pi + 1e-12))


# --------------------------------------------------------------------------
# quantum protocol


def phase_average(system: SpinSystem, angles: AngleSet) -> np.ndarray:
    """Matrix of (1/K) sum_k exp(-i phi_k (m - m'))."""
    dm = system.m[:, None] - system.m[None, :]
    return np.exp(-1j * np.multiply.outer(angles.angles, dm)).mean(axis=0)


def _central_binom(n: int) -> int:
    h = n // 2
    return comb(2 * h, h)


def sign_coefficients(system: SpinSystem) -> np.ndarray:
    """Off-diagonal entries of sgn(I_x) from their closed form.

    Entries vanish unless m' - m is odd; the diagonal is zero.
    """
    if system.d % 2:
        raise UnsupportedDimension(f"closed form needs even d, got d={system.d}")
    return _sign_coefficients(system.two_j)


@lru_cache(maxsize=None)
def _sign_coefficients(two_j: int) -> np.ndarray:
    d = two_j + 1
    C = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            diff = j - i  # m' - m
            if diff % 2 == 0:
                continue
            # J+m = i, J-m = 2J-i
            binoms = (_central_binom(i) * _central_binom(two_j - i)
                      * _central_binom(j) * _central_binom(two_j - j))
            odd = 1
            for n in (i, two_j - i, j, two_j - j):
                odd *= n ** (n % 2)
            sign = -1 if ((diff - 1) // 2) % 2 else 1
            C[i, j] = sign * 2.0 ** (-(two_j - 1)) / diff * np.sqrt(binoms * odd)
    C.setflags(write=False)
    return C


def q_matrix(system: SpinSystem, angles: AngleSet, method: str = "closed-form") -> np.ndarray:
    """Angle-averaged, frame-rotated positivity operator Q.

    Parameters
    ----------
    method : {"closed-form", "brute-force"}
        ``"brute-force"`` conjugates Pos(I_x) by exp(-i phi_k I_z) for each
        angle; ``"closed-form"`` uses the analytic matrix elements.
    """
    if method == "brute-force":
        P = pos_operator(system).matrix
        Q = np.zeros((system.d, system.d), complex)
        for phi in angles.angles:
            U = rz(system, phi)
            Q += U @ P @ U.conj().T
        Q /= angles.K
    elif method == "closed-form":
        Q = 0.5 * (np.eye(system.d) + sign_coefficients(system) * phase_average(system, angles))
    else:
        raise InvalidArgument(f"unknown method {method!r}")
    return (Q + Q.conj().T) / 2


@dataclass(frozen=True)
class ScoreReport:
    score: float
    K: int
    classical_bound: float
    quantum_max: float | None = None
    state_used: QuditState | None = field(default=None, repr=False)

    @property
    def violation_flag(self) -> bool:
        return self.score > self.classical_bound

    def to_dict(self) -> dict:
        out = {
            "score": self.score,
            "K": self.K,
            "classical_bound": self.classical_bound,
            "quantum_max": self.quantum_max,
            "violation_flag": self.violation_flag,
            "state_used": None,
        }
        if self.state_used is not None and self.state_used.is_pure:
            out["state_used"] = [[float(c.real), float(c.imag)] for c in self.state_used.data]
        return out


def quantum_score(state: QuditState, angles: AngleSet, with_max: bool = True) -> ScoreReport:
    """Expected protocol score Tr(rho Q) of ``state`` at the given angles."""
    Q = q_matrix(state.system, angles)
    if state.is_pure:
        score = np.vdot(state.data, Q @ state.data).real
    else:
        score = np.trace(state.data @ Q).real
    qmax = float(np.linalg.eigvalsh(Q)[-1]) if with_max else None
    return ScoreReport(float(score), angles.K, float(classical_bound(angles.K)), qmax, state)


@dataclass(frozen=True)
class MaxScore:
    value: float
    state: QuditState
    degenerate: bool
    eigenspace: np.ndarray = field(repr=False)

    def __iter__(self):
        yield self.value
        yield self.state


def max_quantum_score(system: SpinSystem, angles: AngleSet) -> MaxScore:
    """Top eigenvalue of Q and a corresponding eigenvector.

    When the top eigenvalue is degenerate the returned vector is one
    arbitrary member of the eigenspace; compare states against
    ``eigenspace`` rather than against ``state`` in that case.
    """
    top = top_eigen(q_matrix(system, angles))
    return MaxScore(top.value, QuditState.pure(system, top.vector, renormalize=True),
                    top.degenerate, top.eigenspace)


def violating_cat(system: SpinSystem, K: int, phi0: float = 0.0) -> QuditState:
    """Cat state on +-K/2 with the phase that maximises the uniform-K score at offset phi0."""
    K = _check_K(K)
    phase = np.pi * ((K - 1) // 2) - phi0 * K
    return cat_state(system, Fraction(K, 2), phase)


# --------------------------------------------------------------------------
# closed-form maxima for K < d <= 3K


def mixing_angle(system: SpinSystem, K: int) -> float:
    """Weight angle between |-J> and |-J+2K> in the optimal state.

    Zero for d <= 2K.  For 2K < d <= 3K the optimal state is the top
    eigenvector of a three-level star coupling |-J+K> to both |-J> and
    |-J+2K>, and tan(lambda) is the ratio of those two couplings.
    """
    K = _check_K(K)
    J2, d = system.two_j, system.d
    if d <= 2 * K:
        return 0.0
    J = Fraction(J2, 2)
    n = floor(J - K)
    ratio = Fraction(comb(2 * K, K) * comb(2 * n, n)) * (J - K) / (J * _central_binom(J2))
    return float(np.arctan(np.sqrt(float(ratio))))


def printed_mixing_angle(system: SpinSystem, K: int) -> float:
    """The literature expression for the mixing angle, transcribed as printed.

    Kept for comparison only: it disagrees with the eigensolver (for
    d=8, K=3 it gives tan^2 = 0.35 where 1/7 is required).
    """
    K = _check_K(K)
    if system.d <= 2 * K:
        return 0.0
    J = Fraction(system.two_j, 2)
    n = floor(J - K)
    b = comb(2 * n, n)
    num = (J - (system.d % 2) * K) * b
    den = (J - K) * b * comb(2 * K, K)
    return float(np.arctan(np.sqrt(float(num / den))))


def closed_form_max(system: SpinSystem, K: int, lam: float | None = None) -> tuple[float, QuditState]:
    """Maximal uniform-angle score and optimal state for K < d <= 3K.

    Parameters
    ----------
    lam : float, optional
        Override the mixing angle (used to evaluate alternative
        expressions); defaults to :func:`mixing_angle`.
    """
    K = _check_K(K)
    d = system.d
    if d % 2:
        raise UnsupportedDimension(f"closed form needs even d, got d={d}")
    if not K < d <= 3 * K:
        raise UnsupportedRegime(f"closed form covers K < d <= 3K; got d={d}, K={K}")
    J = system.two_j / 2
    if lam is None:
        lam = mixing_angle(system, K)
    half = (K - 1) // 2
    root = np.sqrt(
        comb(K - 1, half) * (2 * J / K - d % 2)
        * _central_binom(system.two_j) * _central_binom(system.two_j - K)
    )
    value = 0.5 * (1 + 2.0 ** (-(2 * J - 1)) / np.cos(lam) * root)
    sign = (-1) ** half
    psi = np.zeros(d, complex)
    psi[K] = 1 / np.sqrt(2)
    psi[0] = sign * np.cos(lam) / np.sqrt(2)
    if d > 2 * K:
        psi[2 * K] = sign * np.sin(lam) / np.sqrt(2)
    return float(value), QuditState.pure(system, psi, renormalize=True)


def cat_closed_form(K: int) -> float:
    """1/2 + 2^-K binom(K-1, (K-1)/2), the d = K+1 maximum."""
    K = _check_K(K)
    return 0.5 + comb(K - 1, (K - 1) // 2) / 2 ** K


# --------------------------------------------------------------------------
# sweeps and state comparison


def pos_curve(state: QuditState, phis) -> np.ndarray:
    """<Pos(I_x)> on exp(i phi I_z)|psi> for each phi."""
    P = pos_operator(state.system).matrix
    m = state.system.m
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    phase = np.exp(1j * np.outer(phis, m))  # rows: diagonal of exp(i phi I_z)
    if state.is_pure:
        W = phase * state.data
        vals = np.einsum("ki,ij,kj->k", W.conj(), P, W)
    else:
        rho = state.data
        vals = np.einsum("ki,ij,kj,ji->k", phase, rho, phase.conj(), P)
    return vals.real


def pos_sweep(state: QuditState, n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """<Pos(I_x)> at ``n_points`` uniform angles in [0, 2 pi)."""
    if n_points < 2:
        raise InvalidArgument("n_points must be at least 2")
    phis = TWO_PI * np.arange(n_points) / n_points
    return phis, pos_curve(state, phis)


def count_cyclic_maxima(values, tol: float = 1e-12) -> int:
    """Number of strict local maxima of a periodic sampled curve."""
    v = np.asarray(values)
    if np.ptp(v) < tol:
        return 0
    return int(np.count_nonzero((v > np.roll(v, 1) + tol) & (v >= np.roll(v, -1))))


def best_offset_score(state: QuditState, angles: AngleSet, n_grid: int = 720) -> tuple[float, float]:
    """Maximise the score over a common shift of ``angles``; returns (offset, score)."""
    base = TWO_PI * np.arange(n_grid) / n_grid

    def score(delta):
        return float(np.mean(pos_curve(state, angles.angles + delta)))

    grid = np.array([score(x) for x in base])
    i = int(np.argmax(grid))
    res = minimize_scalar(lambda x: -score(x), bounds=(base[i] - TWO_PI / n_grid, base[i] + TWO_PI / n_grid),
                          method="bounded", options={"xatol": 1e-12})
    if -res.fun >= grid[i]:
        return float(res.x), float(-res.fun)
    return float(base[i]), float(grid[i])


def aligned_fidelity(target: QuditState, candidates, rotate: bool = True) -> float:
    """Best overlap of ``target`` with a state or eigenspace, optionally up to R_z.

    ``candidates`` is either a pure :class:`QuditState` or a matrix whose
    orthonormal columns span a (degenerate) eigenspace.  With ``rotate``
    the overlap is maximised over z-rotations R_z(delta) of the target,
    which relate optimal states of angle sets differing by a common shift.
    """
    B = candidates.data[:, None] if isinstance(candidates, QuditState) else np.asarray(candidates)
    t = target.amplitudes
    m = target.system.m

    def overlap(delta):
        return float(np.sum(np.abs(B.conj().T @ (np.exp(-1j * delta * m) * t)) ** 2))

    if not rotate:
        return min(overlap(0.0), 1.0)
    grid = TWO_PI * np.arange(2048) / 2048
    vals = [overlap(x) for x in grid]
    i = int(np.argmax(vals))
    res = minimize_scalar(lambda x: -overlap(x), bounds=(grid[i] - 0.01, grid[i] + 0.01),
                          method="bounded", options={"xatol": 1e-13})
    return min(max(vals[i], -res.fun), 1.0)
