"""Spin-J operator algebra, qudit states and the positivity observable.

All matrices are written in the I_z eigenbasis ordered by ascending
magnetic quantum number, m = -J, -J+1, ..., +J.  Level index ``i``
corresponds to ``m = i - J``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import (
    InvalidArgument,
    NumericalInconsistency,
    UnsupportedDimension,
)

STRUCT_TOL = 1e-12
DERIVED_TOL = 1e-10
DEGENERACY_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def parse_spin(J) -> Fraction:
    """Return ``J`` as an exact half-integer, accepting ``3.5``, ``"7/2"`` etc."""
    try:
        val = Fraction(J) if not isinstance(J, float) else Fraction(J).limit_denominator(2)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InvalidArgument(f"cannot interpret {J!r} as a spin quantum number") from exc
    if isinstance(J, float) and abs(float(val) - J) > 1e-9:
        raise InvalidArgument(f"J={J} is not a half-integer")
    if (2 * val).denominator != 1 or val <= 0:
        raise InvalidArgument(f"J={J} must be a positive integer or half-integer")
    return val


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """Spin-J operators in the ascending-m z basis.

    Use :func:`spin_operators` rather than constructing directly; it
    caches one instance per J.
    """

    two_j: int
    Ix: np.ndarray = field(repr=False)
    Iy: np.ndarray = field(repr=False)
    Iz: np.ndarray = field(repr=False)

    @property
    def J(self) -> float:
        return self.two_j / 2

    @property
    def spin(self) -> Fraction:
        return Fraction(self.two_j, 2)

    @property
    def d(self) -> int:
        return self.two_j + 1

    @property
    def m(self) -> np.ndarray:
        return np.arange(self.d) - self.J

    def __eq__(self, other):
        return isinstance(other, SpinSystem) and other.two_j == self.two_j

    def __hash__(self):
        return hash(self.two_j)

    def component(self, axis) -> np.ndarray:
        """n.I for a 3-vector ``axis``, or I_x / I_y / I_z for "x", "y", "z"."""
        if isinstance(axis, str):
            return {"x": self.Ix, "y": self.Iy, "z": self.Iz}[axis]
        n = np.asarray(axis, dtype=float)
        return n[0] * self.Ix + n[1] * self.Iy + n[2] * self.Iz


@lru_cache(maxsize=None)
def _build(two_j: int) -> SpinSystem:
    J = two_j / 2
    m = np.arange(two_j + 1) - J
    # <m+1|I_+|m> = sqrt(J(J+1) - m(m+1)), placed below the diagonal
    raise_ = np.diag(np.sqrt(J * (J + 1) - m[:-1] * (m[:-1] + 1)), k=-1)
    Ix = (raise_ + raise_.T) / 2
    Iy = (raise_ - raise_.T) / 2j
    Iz = np.diag(m).astype(complex)
    return SpinSystem(two_j, _frozen(Ix.astype(complex)), _frozen(Iy), _frozen(Iz))


def spin_operators(J) -> SpinSystem:
    """Build (or fetch the cached) spin-J operator set.

    Parameters
    ----------
    J : int, float, str or Fraction
        Spin quantum number; ``2J`` must be a positive integer.

    Raises
    ------
    InvalidArgument
        For non-half-integer or non-positive ``J``.
    """
    return _build(int(2 * parse_spin(J)))


def system_for_dimension(d: int) -> SpinSystem:
    if int(d) != d or d < 2:
        raise InvalidArgument(f"dimension must be an integer >= 2, got {d}")
    return _build(int(d) - 1)


# --------------------------------------------------------------------------
# linear-algebra helpers


def expm_hermitian(H: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(-i t H) for Hermitian ``H`` via its eigendecomposition."""
    w, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


@dataclass(frozen=True)
class TopEigen:
    value: float
    vector: np.ndarray
    gap: float
    degenerate: bool
    eigenspace: np.ndarray  # columns span the (near-)degenerate top eigenspace


def top_eigen(H: np.ndarray, tol: float = DEGENERACY_TOL) -> TopEigen:
    """Largest eigenvalue of a Hermitian matrix, flagging degeneracy within ``tol``."""
    w, v = np.linalg.eigh(H)
    top = w[-1]
    gap = top - w[-2] if len(w) > 1 else np.inf
    block = v[:, w >= top - tol]
    return TopEigen(float(top), v[:, -1], float(gap), block.shape[1] > 1, block)


# --------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class QuditState:
    """A pure state (amplitude vector) or density matrix of a spin system."""

    system: SpinSystem
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        d = self.system.d
        if data.shape == (d,):
            norm = np.linalg.norm(data)
            if abs(norm - 1) > STRUCT_TOL:
                raise InvalidArgument(f"pure state norm is {norm}, expected 1")
        elif data.shape == (d, d):
            if np.abs(data - data.conj().T).max() > STRUCT_TOL:
                raise InvalidArgument("density matrix is not Hermitian")
            if abs(np.trace(data).real - 1) > STRUCT_TOL:
                raise InvalidArgument("density matrix trace differs from 1")
            if np.linalg.eigvalsh(data).min() < -1e-10:
                raise InvalidArgument("density matrix has negative eigenvalues")
        else:
            raise InvalidArgument(f"state shape {data.shape} does not match d={d}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def pure(cls, system: SpinSystem, amplitudes, renormalize: bool = False) -> "QuditState":
        amps = np.asarray(amplitudes, dtype=complex)
        if renormalize:
            amps = amps / np.linalg.norm(amps)
        return cls(system, amps)

    @classmethod
    def mixed(cls, system: SpinSystem, rho) -> "QuditState":
        return cls(system, np.asarray(rho, dtype=complex))

    @property
    def kind(self) -> str:
        return "pure" if self.data.ndim == 1 else "density"

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    @property
    def d(self) -> int:
        return self.system.d

    @property
    def amplitudes(self) -> np.ndarray:
        if not self.is_pure:
            raise InvalidArgument("density-matrix state has no amplitude vector")
        return self.data

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def evolve(self, U: np.ndarray) -> "QuditState":
        if self.is_pure:
            return QuditState(self.system, U @ self.data)
        rho = U @ self.data @ U.conj().T
        return QuditState(self.system, (rho + rho.conj().T) / 2)

    def populations(self) -> np.ndarray:
        if self.is_pure:
            return np.abs(self.data) ** 2
        return np.real(np.diag(self.data)).copy()


def maximally_mixed(system: SpinSystem) -> QuditState:
    return QuditState(system, np.eye(system.d) / system.d)


def basis_state(system: SpinSystem, m) -> QuditState:
    """The I_z eigenstate |J, m>."""
    idx = level_index(system, m)
    v = np.zeros(system.d, complex)
    v[idx] = 1
    return QuditState(system, v)


def level_index(system: SpinSystem, m) -> int:
    i = float(Fraction(m) if isinstance(m, str) else m) + system.J
    if abs(i - round(i)) > 1e-9 or not 0 <= round(i) < system.d:
        raise InvalidArgument(f"m={m} is not a level of spin {system.spin}")
    return int(round(i))


# --------------------------------------------------------------------------
# positivity observable


@dataclass(frozen=True, eq=False)
class PosObservable:
    """Projector onto the positive-eigenvalue subspace of a spin component."""

    matrix: np.ndarray = field(repr=False)
    axis: str = "x"


def sign_operator(system: SpinSystem) -> np.ndarray:
    """sgn(I_x) = sum_m sgn(m) |m_x><m_x|; only defined for even d."""
    if system.d % 2:
        raise UnsupportedDimension(
            f"sgn(I_x) needs even d; d={system.d} has a zero eigenvalue"
        )
    return _sign_x(system.two_j)


@lru_cache(maxsize=None)
def _sign_x(two_j: int) -> np.ndarray:
    system = _build(two_j)
    w, v = np.linalg.eigh(system.Ix)
    S = (v * np.sign(w)) @ v.conj().T
    return _frozen((S + S.conj().T) / 2)


def pos_operator(system: SpinSystem) -> PosObservable:
    """Pos(I_x) = (1 + sgn(I_x)) / 2.

    Raises
    ------
    UnsupportedDimension
        If ``system.d`` is odd.
    """
    S = sign_operator(system)
    return PosObservable(_frozen((np.eye(system.d) + S) / 2), "x")


# --------------------------------------------------------------------------
# rotations


def rz(system: SpinSystem, angle: float) -> np.ndarray:
    """R_z(angle) = exp(-i angle I_z), diagonal with entries exp(-i m angle)."""
    return np.diag(np.exp(-1j * angle * system.m))


def rotation(system: SpinSystem, axis, angle: float) -> np.ndarray:
    """Active rotation exp(-i angle n.I) about the unit vector ``axis``."""
    n = np.asarray(axis, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1) > 1e-9:
        raise InvalidArgument(f"rotation axis {axis} is not a unit 3-vector")
    if n[0] == 0 and n[1] == 0:
        return rz(system, angle * n[2])
    return expm_hermitian(system.component(n), angle)


def basis_rotation(system: SpinSystem) -> np.ndarray:
    """R_{-y}(pi/2), the rotation with R I_x R^dagger = I_z.

    Measuring in the z basis after applying it is a measurement of I_x.
    """
    return rotation(system, (0, -1, 0), np.pi / 2)


# --------------------------------------------------------------------------
# named states


def spin_coherent_state(system: SpinSystem, theta: float, phi: float) -> QuditState:
    """|J, J> rotated so that <I> points along (theta, phi)."""
    psi = np.zeros(system.d, complex)
    psi[-1] = 1
    U = rz(system, phi) @ rotation(system, (0, 1, 0), theta)
    return QuditState.pure(system, U @ psi, renormalize=True)


def cat_state(system: SpinSystem, subspace_J=None, relative_phase: float = 0.0) -> QuditState:
    """(|-j> + e^{i phase} |+j>)/sqrt(2) with j = ``subspace_J`` (default J)."""
    j = system.spin if subspace_J is None else parse_spin(subspace_J)
    if j > system.spin or (system.spin - j).denominator != 1:
        raise InvalidArgument(f"subspace spin {j} does not fit in spin {system.spin}")
    psi = np.zeros(system.d, complex)
    psi[level_index(system, -j)] = 1 / np.sqrt(2)
    psi[level_index(system, j)] += np.exp(1j * relative_phase) / np.sqrt(2)
    return QuditState(system, psi)


def subspace_levels(system: SpinSystem, d_sub: int) -> tuple[int, int]:
    """Inclusive level range of the centred ``d_sub``-dimensional subspace."""
    if d_sub > system.d or (system.d - d_sub) % 2:
        raise InvalidArgument(f"no centred {d_sub}-level subspace in d={system.d}")
    lo = (system.d - d_sub) // 2
    return lo, lo + d_sub - 1


def embed(state: QuditState, system: SpinSystem, lo: int) -> QuditState:
    """Place ``state`` in levels ``lo .. lo+state.d-1`` of ``system``."""
    hi = lo + state.d
    if lo < 0 or hi > system.d:
        raise InvalidArgument("subspace does not fit in the target system")
    if state.is_pure:
        v = np.zeros(system.d, complex)
        v[lo:hi] = state.data
        return QuditState(system, v)
    rho = np.zeros((system.d, system.d), complex)
    rho[lo:hi, lo:hi] = state.data
    return QuditState(system, rho)


# --------------------------------------------------------------------------
# scalar functionals


def expectation(state: QuditState, observable) -> float:
    """Tr(rho O) for Hermitian ``O``; raises if the result is not real."""
    O = observable.matrix if isinstance(observable, PosObservable) else np.asarray(observable)
    if O.shape != (state.d, state.d):
        raise InvalidArgument(f"observable shape {O.shape} does not match d={state.d}")
    if state.is_pure:
        val = np.vdot(state.data, O @ state.data)
    else:
        val = np.trace(state.data @ O)
    if abs(val.imag) > 1e-8:
        raise NumericalInconsistency(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def fidelity(a: QuditState, b: QuditState) -> float:
    """|<a|b>|^2 for pure states, Uhlmann fidelity otherwise."""
    if a.d != b.d:
        raise InvalidArgument("states have different dimensions")
    if a.is_pure and b.is_pure:
        f = abs(np.vdot(a.data, b.data)) ** 2
    elif a.is_pure or b.is_pure:
        psi, rho = (a.data, b.data) if a.is_pure else (b.data, a.data)
        f = np.vdot(psi, rho @ psi).real
    else:
        s = _psd_sqrt(a.data)
        f = np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(s @ b.data @ s), 0, None))) ** 2
    return float(min(max(f, 0.0), 1.0))


# --------------------------------------------------------------------------
# state file format


def state_to_dict(state: QuditState) -> dict:
    if not state.is_pure:
        raise InvalidArgument("only pure states can be written to state files")
    return {
        "J": state.system.J,
        "amplitudes": [[float(c.real), float(c.imag)] for c in state.data],
    }


def state_from_dict(obj: dict, renormalize: bool = False) -> QuditState:
    """Parse ``{"J", "amplitudes"}``; optimizer records ``{"d", "state"}`` are accepted too."""
    try:
        if "amplitudes" in obj:
            system, pairs = spin_operators(obj["J"]), obj["amplitudes"]
        else:
            system, pairs = system_for_dimension(int(obj["d"])), obj["state"]
        amps = np.array([complex(re, im) for re, im in pairs])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"malformed state object: {exc}") from exc
    if amps.shape != (system.d,):
        raise InvalidArgument(f"expected {system.d} amplitudes, got {len(amps)}")
    norm = np.linalg.norm(amps)
    if abs(norm - 1) > 1e-6 and not renormalize:
        raise InvalidArgument(f"amplitudes have norm {norm:.8f}; pass renormalize=True")
    return QuditState.pure(system, amps / norm)


def save_state(state: QuditState, path) -> None:
    Path(path).write_text(json.dumps(state_to_dict(state), indent=2) + "\n")


def load_state(path, renormalize: bool = False) -> QuditState:
    return state_from_dict(json.loads(Path(path).read_text()), renormalize=renormalize)
