"""Projected gradient ascent over unevenly spaced probing angles.

Each angle phi_k is confined to a box of half-width pi/(2K) around the
uniform grid point 2 pi k / K.  Inside that box the sorted order is fixed
and the half-way-partner condition holds automatically, so the classical
bound stays (1 + 1/K)/2 while the quantum maximum can grow.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GradientUndefined
from .protocol import AngleSet, _check_K, check_angle_condition, q_matrix
from .spin import QuditState, SpinSystem, rz, sign_operator, top_eigen

GAP_TOL = 1e-8
GRAD_TOL = 1e-9
STALL_TOL = 1e-6
MAX_ITER = 10_000
INITIAL_STEP = 0.05
MAX_STEP = 10.0


def commutator_sign_z(system: SpinSystem) -> np.ndarray:
    """[sgn(I_x), I_z]."""
    S = sign_operator(system)
    return S @ system.Iz - system.Iz @ S


def _gradient_from_vector(system: SpinSystem, angles: np.ndarray, v: np.ndarray, C: np.ndarray) -> np.ndarray:
    # dQ/dphi_k = (i / 2K) U_k [sgn I_x, I_z] U_k^dagger, U_k = exp(-i phi_k I_z)
    W = np.exp(1j * np.outer(angles, system.m)) * v
    vals = np.einsum("ki,ij,kj->k", W.conj(), C, W)
    return (1j * vals / (2 * len(angles))).real


def score_gradient(system: SpinSystem, angles: AngleSet) -> np.ndarray:
    """Derivative of the maximal score with respect to each probing angle.

    Raises
    ------
    GradientUndefined
        If the top eigenvalue of Q is degenerate (gap below 1e-8) without
        Q being proportional to the identity.
    """
    top = top_eigen(q_matrix(system, angles))
    if top.gap < GAP_TOL:
        if top.eigenspace.shape[1] == system.d:
            # Q is a multiple of the identity: every state scores the same
            return np.zeros(angles.K)
        raise GradientUndefined(f"top eigenvalue gap {top.gap:.2e} below {GAP_TOL}")
    return _gradient_from_vector(system, angles.angles, top.vector, commutator_sign_z(system))


def box_half_width(K: int) -> float:
    return np.pi / (2 * K)


def grid_angles(K: int) -> np.ndarray:
    return 2 * np.pi * np.arange(K) / K


def gauge_center(angles) -> float:
    """Angle of the set about which it is most nearly mirror-symmetric.

    Each angle is tried as the centre; the set is wrapped into (-pi, pi]
    around it and the candidate whose sorted set best matches its own
    reflection wins (ties go to the lowest index).
    """
    a = np.asarray(angles, dtype=float)
    best, best_err = a[0], np.inf
    for c in a:
        w = np.sort(np.angle(np.exp(1j * (a - c))))
        err = np.max(np.abs(w + w[::-1]))
        if err < best_err - 1e-12:
            best, best_err = c, err
    return float(best)


def gauge_fix(angles) -> np.ndarray:
    """Shift a set by minus its :func:`gauge_center` and wrap into (-pi, pi].

    For symmetric sets the median of the result is exactly zero.
    """
    a = np.asarray(angles, dtype=float)
    return np.sort(np.angle(np.exp(1j * (a - gauge_center(a)))))


@dataclass
class OptimizationRun:
    d: int
    K: int
    initial_angles: AngleSet
    final_angles: AngleSet
    initial_score: float
    final_score: float
    final_state: QuditState = field(repr=False)
    iterations: int
    converged: bool
    stop_reason: str
    start_index: int = 0

    @property
    def gauge_fixed_angles(self) -> np.ndarray:
        return gauge_fix(self.final_angles.angles)

    @property
    def gauge_fixed_state(self) -> QuditState:
        """Optimal state for :attr:`gauge_fixed_angles`.

        Shifting every angle by -c conjugates Q by exp(i c I_z).
        """
        c = gauge_center(self.final_angles.angles)
        return self.final_state.evolve(rz(self.final_state.system, -c))

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "K": self.K,
            "score": self.final_score,
            "angles_rad": [float(x) for x in self.gauge_fixed_angles],
            "state": [[float(c.real), float(c.imag)] for c in self.gauge_fixed_state.data],
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _evaluate(system, angles):
    return top_eigen(q_matrix(system, AngleSet(angles)))


def ascend(system: SpinSystem, K: int, offsets: np.ndarray, rng: np.random.Generator,
           max_iter: int = MAX_ITER, tol: float = GRAD_TOL) -> OptimizationRun:
    """Projected gradient ascent from grid offsets ``offsets``.

    Backtracking line search: the first trial step is 0.05 rad per unit
    gradient, halved until the top eigenvalue increases, and doubled
    after every accepted step.  A degenerate top eigenvalue is broken by
    jittering each angle by up to 1e-6.
    """
    K = _check_K(K)
    b = box_half_width(K)
    grid = grid_angles(K)
    C = commutator_sign_z(system)
    x = np.clip(np.asarray(offsets, dtype=float), -b, b)
    initial = AngleSet(grid + x)
    cur = _evaluate(system, grid + x)
    f0 = cur.value
    step = INITIAL_STEP
    reason = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        if cur.gap < GAP_TOL:
            trial = np.clip(x + rng.uniform(-1e-6, 1e-6, K), -b, b)
            ev = _evaluate(system, grid + trial)
            if ev.value >= cur.value - 1e-12:
                x, cur = trial, ev
            continue
        g = _gradient_from_vector(system, grid + x, cur.vector, C)
        pg = np.clip(x + g, -b, b) - x
        pg_norm = np.linalg.norm(pg)
        if pg_norm < tol:
            reason = "gradient"
            break
        accepted = False
        while step > 1e-16:
            trial = np.clip(x + step * g, -b, b)
            ev = _evaluate(system, grid + trial)
            if ev.value > cur.value:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # no representable improvement left along the projected gradient
            reason = "stalled" if pg_norm < STALL_TOL else "line_search"
            break
        x, cur = trial, ev
        step = min(2 * step, MAX_STEP)
    final = AngleSet(grid + x)
    state = QuditState.pure(system, cur.vector, renormalize=True)
    return OptimizationRun(system.d, K, initial, final, f0, cur.value, state, it,
                           reason in ("gradient", "stalled"), reason)


def optimize_angles(system: SpinSystem, K: int, n_starts: int = 64, seed: int = 0,
                    max_iter: int = MAX_ITER) -> OptimizationRun:
    """Best of ``n_starts`` projected-gradient ascents from random box points.

    Start ``i`` draws its initial offsets from its own PCG64 stream,
    ``SeedSequence(seed).spawn(n_starts)[i]``; ties in the final score are
    broken by the lower start index.
    """
    K = _check_K(K)
    b = box_half_width(K)
    best = None
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_starts)):
        rng = np.random.Generator(np.random.PCG64(child))
        run = ascend(system, K, rng.uniform(-b, b, K), rng, max_iter=max_iter)
        run.start_index = i
        if best is None or run.final_score > best.final_score:
            best = run
    assert check_angle_condition(best.final_angles)
    return best
