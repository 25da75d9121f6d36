"""Unitary-level simulation of the precession pulse sequence.

Three step types make up a :class:`PulseSequence`:

* ``GivensStep`` -- a selective rotation about +-y between adjacent levels
  ``i`` and ``i+1``; pulse area ``beta`` rotates amplitude by ``beta/2``.
* ``FrameShift`` -- a virtual SNAP gate from increments of the 2J
  transition reference-clock phases.
* ``SU2Step`` -- a rigid rotation about +-y, optionally confined to a
  contiguous subspace in which it acts as the spin-(d-1)/2 rotation.

The protocol is: ladder preparation from |-J>, a virtual z-rotation,
the basis rotation R_{-y}(pi/2), and a z-basis population readout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import InvalidArgument, UnsupportedState
from .protocol import AngleSet
from .spin import QuditState, SpinSystem, expm_hermitian, spin_operators

_AXES = {"+y": 1, "-y": -1}


def _axis_sign(axis: str) -> int:
    try:
        return _AXES[axis]
    except KeyError:
        raise InvalidArgument(f"axis must be '+y' or '-y', got {axis!r}") from None


def subspace_range(system: SpinSystem, subspace=None) -> tuple[int, int]:
    """Normalise a subspace spec to an inclusive, validated ``(lo, hi)``.

    ``subspace`` may be ``None`` (whole space), a ``(lo, hi)`` pair, or an
    explicit collection of level indices, which must be contiguous.
    """
    if subspace is None:
        return 0, system.d - 1
    levels = sorted(int(x) for x in subspace)
    if len(levels) == 2 and not isinstance(subspace, (set, frozenset)):
        lo, hi = levels
    else:
        lo, hi = levels[0], levels[-1]
        if levels != list(range(lo, hi + 1)):
            raise InvalidArgument(f"subspace levels {levels} are not contiguous")
    if lo < 0 or hi >= system.d or hi <= lo:
        raise InvalidArgument(f"subspace {lo}..{hi} is not inside 0..{system.d - 1}")
    if (hi - lo + 1) % 2:
        raise InvalidArgument(f"subspace {lo}..{hi} has odd size")
    return lo, hi


# --------------------------------------------------------------------------
# steps


@dataclass(frozen=True)
class GivensStep:
    transition: int
    area: float
    axis: str = "+y"


@dataclass(frozen=True)
class FrameShift:
    phases: tuple  # clock-phase increments, one per transition


@dataclass(frozen=True)
class SU2Step:
    axis: str
    angle: float
    subspace: tuple | None = None


Step = Union[GivensStep, FrameShift, SU2Step]


@dataclass
class PulseSequence:
    d: int
    steps: list = field(default_factory=list)

    def __post_init__(self):
        for step in self.steps:
            self._validate(step)

    def _validate(self, step):
        if isinstance(step, GivensStep):
            if not 0 <= step.transition < self.d - 1:
                raise InvalidArgument(f"transition {step.transition} outside 0..{self.d - 2}")
            if not 0 <= step.area < 2 * np.pi:
                raise InvalidArgument(f"pulse area {step.area} outside [0, 2 pi)")
            _axis_sign(step.axis)
        elif isinstance(step, FrameShift):
            if len(step.phases) != self.d - 1:
                raise InvalidArgument(f"frame shift needs {self.d - 1} clock phases")
        elif isinstance(step, SU2Step):
            _axis_sign(step.axis)
        else:
            raise InvalidArgument(f"unknown step {step!r}")

    def append(self, step: Step) -> None:
        self._validate(step)
        self.steps.append(step)

    def __iter__(self):
        return iter(self.steps)

    def __len__(self):
        return len(self.steps)

    def areas(self) -> list[float]:
        return [s.area for s in self.steps if isinstance(s, GivensStep)]


# --------------------------------------------------------------------------
# phase frames and SNAP gates


@dataclass
class PhaseFrame:
    """Reference-clock phases of the 2J transitions, owned by a single run."""

    clock_phases: np.ndarray

    @classmethod
    def zero(cls, system: SpinSystem) -> "PhaseFrame":
        return cls(np.zeros(system.d - 1))

    def shift(self, increments) -> None:
        self.clock_phases = self.clock_phases + np.asarray(increments, dtype=float)

    def virtual_phases(self) -> np.ndarray:
        return virtual_phases(self.clock_phases)


def virtual_phases(increments) -> np.ndarray:
    """Level phases xi_m = -sum_{i<m} dphi_i, with xi_0 = 0."""
    return -np.concatenate([[0.0], np.cumsum(np.asarray(increments, dtype=float))])


def snap_unitary(xi) -> np.ndarray:
    return np.diag(np.exp(1j * np.asarray(xi, dtype=float)))


def virtual_rz(system: SpinSystem, phi: float, subspace=None) -> FrameShift:
    """Frame shift realising R_z(phi) (up to global phase) inside ``subspace``.

    Only the clocks of transitions between subspace levels are advanced.
    """
    lo, hi = subspace_range(system, subspace)
    inc = np.zeros(system.d - 1)
    inc[lo:hi] = phi
    return FrameShift(tuple(float(x) for x in inc))


# --------------------------------------------------------------------------
# SU(2) rotations


def embedded_generator(system: SpinSystem, subspace=None) -> np.ndarray:
    """Spin-(d-1)/2 I_y placed on the subspace block, zero elsewhere."""
    lo, hi = subspace_range(system, subspace)
    G = np.zeros((system.d, system.d), complex)
    G[lo:hi + 1, lo:hi + 1] = spin_operators((hi - lo) / 2).Iy
    return G


def drive_scaling(system: SpinSystem, subspace=None) -> np.ndarray:
    """Relative tone amplitudes turning an equal-amplitude drive into a subspace SU(2) drive."""
    lo, hi = subspace_range(system, subspace)
    sub = spin_operators((hi - lo) / 2)
    full = np.real(np.diag(system.Ix, 1))
    scale = np.zeros(system.d - 1)
    scale[lo:hi] = np.real(np.diag(sub.Ix, 1)) / full[lo:hi]
    return scale


def su2_pulse(system: SpinSystem, axis: str, angle: float, subspace=None) -> SU2Step:
    _axis_sign(axis)
    lo, hi = subspace_range(system, subspace)
    sub = None if (lo, hi) == (0, system.d - 1) else (lo, hi)
    return SU2Step(axis, float(angle), sub)


def givens_unitary(system: SpinSystem, transition: int, area: float, axis: str) -> np.ndarray:
    """Two-level rotation exp(-i s area Y) on levels (i, i+1), Y the spin-1/2 I_y."""
    s = _axis_sign(axis)
    c, sn = np.cos(area / 2), np.sin(area / 2)
    U = np.eye(system.d, dtype=complex)
    i = transition
    # exp(-i s beta Y) with Y = [[0, i/2], [-i/2, 0]]
    U[i, i], U[i, i + 1] = c, s * sn
    U[i + 1, i], U[i + 1, i + 1] = -s * sn, c
    return U


def step_unitary(system: SpinSystem, step: Step) -> np.ndarray:
    if isinstance(step, GivensStep):
        return givens_unitary(system, step.transition, step.area, step.axis)
    if isinstance(step, FrameShift):
        return snap_unitary(virtual_phases(step.phases))
    if isinstance(step, SU2Step):
        G = embedded_generator(system, step.subspace)
        return expm_hermitian(G, _axis_sign(step.axis) * step.angle)
    raise InvalidArgument(f"unknown step {step!r}")


def apply_sequence(start: QuditState, seq) -> QuditState:
    state = start
    for step in seq:
        state = state.evolve(step_unitary(start.system, step))
    return state


def ground_state(system: SpinSystem) -> QuditState:
    v = np.zeros(system.d, complex)
    v[0] = 1
    return QuditState(system, v)


# --------------------------------------------------------------------------
# ladder compilation


def _real_coefficients(target: QuditState, tol: float = 1e-9) -> np.ndarray:
    c = target.amplitudes
    ref = c[np.argmax(np.abs(c))]
    c = c * np.conj(ref) / abs(ref)
    if np.abs(c.imag).max() > tol:
        raise UnsupportedState(
            "ladder compilation needs relative phases of 0 or pi between coefficients"
        )
    c = c.real
    first = c[np.abs(c) > tol][0]
    return c * np.sign(first)


def ladder_compile(target: QuditState, tol: float = 1e-12) -> PulseSequence:
    """Givens ladder preparing ``target`` from |-J>.

    Step ``m`` leaves amplitude |c_m| on level m and moves the rest up to
    level m+1, with pulse area 2 arccos(|c_m| / sqrt(sum_{i>=m} c_i^2)).
    The axis is chosen so the transferred amplitude carries the sign of
    the next non-zero coefficient.

    Raises
    ------
    UnsupportedState
        If the coefficients are not real up to a global phase.
    """
    system = target.system
    c = _real_coefficients(target)
    d = system.d
    tail = np.sqrt(np.cumsum((c ** 2)[::-1])[::-1])
    nonzero = np.abs(c) > tol
    seq = PulseSequence(d)
    carried = 1.0
    for m in range(d - 1):
        r = tail[m]
        theta = 0.0 if r < tol else float(np.arccos(np.clip(abs(c[m]) / r, 0.0, 1.0)))
        later = np.flatnonzero(nonzero[m + 1:])
        nxt = np.sign(c[m + 1 + later[0]]) if len(later) else carried
        # +y sends +a|m> to -a sin|m+1>, -y to +a sin|m+1>
        axis = "-y" if nxt == carried else "+y"
        seq.append(GivensStep(m, 2 * theta, axis))
        carried = nxt
    return seq


# --------------------------------------------------------------------------
# protocol pipeline


@dataclass(frozen=True)
class ProtocolPoint:
    phi: float
    probabilities: np.ndarray = field(repr=False)
    positive: np.ndarray = field(repr=False)

    @property
    def pos(self) -> float:
        return float(self.probabilities[self.positive].sum())


def positive_levels(system: SpinSystem, subspace=None) -> np.ndarray:
    """Boolean mask of the levels with local m > 0 inside the subspace."""
    lo, hi = subspace_range(system, subspace)
    mask = np.zeros(system.d, bool)
    mask[lo + (hi - lo + 1) // 2: hi + 1] = True
    return mask


def protocol_steps(system: SpinSystem, phi: float, subspace=None) -> list:
    """Precession by phi (state -> exp(i phi I_z) state) then the basis rotation."""
    return [virtual_rz(system, -phi, subspace), su2_pulse(system, "-y", np.pi / 2, subspace)]


def run_protocol(target: QuditState, angles, subspace=None) -> list[ProtocolPoint]:
    """Simulate preparation, precession, basis rotation and readout at each angle.

    ``angles`` may be an :class:`AngleSet` or any sequence of radians (for
    sweeps).  Returns the z-basis populations after the basis rotation.
    """
    system = target.system
    phis = angles.angles if isinstance(angles, AngleSet) else np.asarray(angles, dtype=float)
    prepared = apply_sequence(ground_state(system), ladder_compile(target))
    mask = positive_levels(system, subspace)
    out = []
    for phi in phis:
        final = apply_sequence(prepared, protocol_steps(system, phi, subspace))
        out.append(ProtocolPoint(float(phi), final.populations(), mask))
    return out


def protocol_score(points: Sequence[ProtocolPoint]) -> float:
    return float(np.mean([p.pos for p in points]))


# --------------------------------------------------------------------------
# time-domain evolution in the generalised rotating frame


@dataclass(frozen=True)
class DeviceParams:
    """NMR device constants; defaults are the 123-Sb device characterisation."""

    f_nmr_mhz: tuple = (7.5963, 7.6246, 7.6529, 7.6812, 7.7095, 7.7739, 7.7664)
    pi_time_ms: tuple = (0.328, 0.254, 0.227, 0.220, 0.223, 0.251, 0.329)
    t2_star_ms: tuple = (27.77, 37.79, 80.18, 167.17, 85.43, 51.09, 28.37)
    b0_tesla: float = 1.384
    gamma_n_mhz_per_t: float = 5.55
    fq_khz: float = 28.3
    su2_pi_time_ms: float = 3.0

    def __post_init__(self):
        n = len(self.f_nmr_mhz)
        if len(self.pi_time_ms) != n or len(self.t2_star_ms) != n:
            raise InvalidArgument("f_nmr_mhz, pi_time_ms and t2_star_ms must have equal length")
        if len(set(self.f_nmr_mhz)) != n:
            raise InvalidArgument("NMR frequencies must be distinct")

    @property
    def gamma_hz_per_t(self) -> float:
        return self.gamma_n_mhz_per_t * 1e6

    def check(self, system: SpinSystem) -> None:
        if len(self.f_nmr_mhz) != system.d - 1:
            raise InvalidArgument(f"device lists {len(self.f_nmr_mhz)} transitions, spin needs {system.d - 1}")

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def load_device_params(path) -> DeviceParams:
    """Read device constants from a TOML or JSON file (keys as in :class:`DeviceParams`)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        raw = tomllib.loads(text)
    else:
        raw = json.loads(text)
    known = DeviceParams.__dataclass_fields__
    unknown = set(raw) - set(known)
    if unknown:
        raise InvalidArgument(f"unknown device keys: {sorted(unknown)}")
    return DeviceParams(**{k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()})


@dataclass(frozen=True)
class DriveSegment:
    """Constant tone amplitudes (tesla) and phases (rad) held for ``duration`` seconds."""

    amplitudes: tuple
    phases: tuple
    duration: float


def grf_hamiltonian(system: SpinSystem, segment: DriveSegment, params: DeviceParams) -> np.ndarray:
    """Tridiagonal GRF Hamiltonian in Hz: H[i, i+1] = g_i exp(i phi_i).

    g_i = -(gamma_n / 4) B_{1,i} <i|I_x|i+1>.
    """
    B = np.asarray(segment.amplitudes, dtype=float)
    ph = np.asarray(segment.phases, dtype=float)
    if B.shape != (system.d - 1,) or ph.shape != (system.d - 1,):
        raise InvalidArgument(f"drive needs {system.d - 1} amplitudes and phases")
    g = -(params.gamma_hz_per_t / 4) * B * np.real(np.diag(system.Ix, 1))
    upper = np.diag(g * np.exp(1j * ph), 1)
    return upper + upper.conj().T


def time_evolve(start: QuditState, segments: Sequence[DriveSegment], params: DeviceParams,
                max_step: float | None = None) -> QuditState:
    """Piecewise-constant evolution exp(-i 2 pi H_G t) per segment.

    Each constant segment is one exact exponential.  ``max_step`` (seconds)
    optionally splits segments into equal sub-steps, which only matters
    if callers want intermediate states at a fixed resolution.
    """
    state = start
    for seg in segments:
        if seg.duration < 0:
            raise InvalidArgument("segment duration must be non-negative")
        H = grf_hamiltonian(start.system, seg, params)
        n = 1 if max_step is None else max(1, int(np.ceil(seg.duration / max_step)))
        U = expm_hermitian(H, 2 * np.pi * seg.duration / n)
        for _ in range(n):
            state = state.evolve(U)
    return state


def pi_amplitude(system: SpinSystem, transition: int, pi_time_s: float, params: DeviceParams) -> float:
    """Single-tone amplitude giving a full population swap on ``transition`` in ``pi_time_s``."""
    element = np.real(system.Ix[transition, transition + 1])
    return 1.0 / (params.gamma_hz_per_t * pi_time_s * element)


def givens_segment(system: SpinSystem, step: GivensStep, params: DeviceParams,
                   pi_time_s: float | None = None) -> DriveSegment:
    """Single-tone drive equivalent to ``step``, timed from the device pi-time."""
    params.check(system)
    i = step.transition
    t_pi = params.pi_time_ms[i] * 1e-3 if pi_time_s is None else pi_time_s
    B = np.zeros(system.d - 1)
    B[i] = pi_amplitude(system, i, t_pi, params)
    ph = np.zeros(system.d - 1)
    ph[i] = -_axis_sign(step.axis) * np.pi / 2
    return DriveSegment(tuple(B), tuple(ph), step.area / np.pi * t_pi)


def su2_segment(system: SpinSystem, step: SU2Step, params: DeviceParams,
                pi_time_s: float | None = None) -> DriveSegment:
    """Multi-tone drive realising ``step``; equal amplitudes on the full space.

    Subspace rotations rescale each tone by :func:`drive_scaling` so that
    the driven block matches the smaller spin's I_y.
    """
    t_pi = params.su2_pi_time_ms * 1e-3 if pi_time_s is None else pi_time_s
    B = 2.0 / (params.gamma_hz_per_t * t_pi) * drive_scaling(system, step.subspace)
    ph = np.full(system.d - 1, -_axis_sign(step.axis) * np.pi / 2)
    return DriveSegment(tuple(B), tuple(ph), step.angle / np.pi * t_pi)


# --------------------------------------------------------------------------
# sequence files


def step_to_dict(step: Step) -> dict:
    if isinstance(step, GivensStep):
        return {"type": "givens", "transition": step.transition, "area": step.area, "axis": step.axis}
    if isinstance(step, FrameShift):
        return {"type": "frame_shift", "phases": list(step.phases)}
    if isinstance(step, SU2Step):
        return {"type": "su2", "axis": step.axis, "angle": step.angle,
                "subspace": None if step.subspace is None else list(step.subspace)}
    raise InvalidArgument(f"unknown step {step!r}")


def step_from_dict(obj: dict) -> Step:
    kind = obj.get("type")
    try:
        if kind == "givens":
            return GivensStep(int(obj["transition"]), float(obj["area"]), obj.get("axis", "+y"))
        if kind == "frame_shift":
            return FrameShift(tuple(float(x) for x in obj["phases"]))
        if kind == "su2":
            sub = obj.get("subspace")
            return SU2Step(obj["axis"], float(obj["angle"]), None if sub is None else tuple(sub))
    except KeyError as exc:
        raise InvalidArgument(f"step {obj} is missing {exc}") from exc
    raise InvalidArgument(f"unknown step type {kind!r}")


def sequence_to_json(seq: PulseSequence) -> str:
    return json.dumps([step_to_dict(s) for s in seq], indent=2)


def sequence_from_json(text: str, d: int) -> PulseSequence:
    return PulseSequence(d, [step_from_dict(o) for o in json.loads(text)])
