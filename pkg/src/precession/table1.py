"""Reference rows for the nine benchmark (d, K) combinations.

Each row carries its listed optimal state (amplitudes in ascending m,
rounded values renormalised on use), the classical bound and the listed
maximum quantum score.  ``host_levels`` locates the row's spin inside a
spin-7/2 host, where smaller spins are realised as centred subspaces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .optimizer import OptimizationRun, optimize_angles
from .protocol import AngleSet, MaxScore, max_quantum_score
from .spin import QuditState, SpinSystem, subspace_levels, system_for_dimension

HOST_DIMENSION = 8

_r2 = 1 / np.sqrt(2)


@dataclass(frozen=True)
class Table1Row:
    label: str
    d: int
    K: int
    uneven: bool
    listed_max: float
    amplitudes: tuple

    @property
    def system(self) -> SpinSystem:
        return system_for_dimension(self.d)

    @property
    def classical(self) -> float:
        return (1 + 1 / self.K) / 2

    @property
    def tolerance(self) -> float:
        return 0.002 if self.uneven else 0.0005

    def state(self) -> QuditState:
        return QuditState.pure(self.system, np.array(self.amplitudes, dtype=complex), renormalize=True)

    def host_levels(self) -> tuple[int, int]:
        return subspace_levels(system_for_dimension(HOST_DIMENSION), self.d)

    def host_state(self) -> QuditState:
        from .spin import embed

        lo, _ = self.host_levels()
        return embed(self.state(), system_for_dimension(HOST_DIMENSION), lo)


ROWS = (
    Table1Row("P8_7", 8, 7, False, 0.656, (_r2, 0, 0, 0, 0, 0, 0, -_r2)),
    Table1Row("P8_5", 8, 5, False, 0.643, (_r2, 0, 0, 0, 0, -_r2, 0, 0)),
    Table1Row("P8_3", 8, 3, False, 0.698, (np.sqrt(7) / 4, 0, 0, -_r2, 0, 0, 0.25, 0)),
    Table1Row("P8_5u", 8, 5, True, 0.683,
              (0.665, 0.072, -0.199, 0.117, -0.117, 0.199, 0.072, -0.665)),
    Table1Row("P8_3u", 8, 3, True, 0.745,
              (0.600, -0.145, -0.336, -0.078, 0.078, 0.336, 0.145, -0.600)),
    Table1Row("P6_5", 6, 5, False, 0.688, (_r2, 0, 0, 0, 0, -_r2)),
    Table1Row("P6_3", 6, 3, False, 0.698, (_r2, 0, 0, -_r2, 0, 0)),
    Table1Row("P6_3u", 6, 3, True, 0.746, (0.645, -0.119, -0.264, -0.264, -0.119, 0.645)),
    Table1Row("P4_3", 4, 3, False, 0.750, (_r2, 0, 0, -_r2)),
)

LABELS = tuple(r.label for r in ROWS)


def row(label: str) -> Table1Row:
    for r in ROWS:
        if r.label == label:
            return r
    raise InvalidArgument(f"unknown row {label!r}; choose from {', '.join(LABELS)}")


def compute_row(r: Table1Row, n_starts: int = 64, seed: int = 0) -> MaxScore | OptimizationRun:
    """Eigensolver maximum on the uniform grid, or the optimizer result for uneven rows."""
    if r.uneven:
        return optimize_angles(r.system, r.K, n_starts=n_starts, seed=seed)
    return max_quantum_score(r.system, AngleSet.uniform_set(r.K))


def computed_max(r: Table1Row, n_starts: int = 64, seed: int = 0) -> float:
    res = compute_row(r, n_starts, seed)
    return res.final_score if r.uneven else res.value
